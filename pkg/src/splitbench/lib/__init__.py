# Reusable machinery shared by the core plugins and the command line.
