import os
import json
import sys
from datetime import datetime
from loguru import logger

LOG_FORMAT = "{time} | {level} | {function} | {message}"

_log_dir = "logs"


def json_sink(message):
    record = message.record
    log_entry = {
        "time": record["time"].isoformat(),
        "level": record["level"].name,
        "function": record["function"],
        "message": record["message"],
        "extra": {key: str(value) for key, value in record["extra"].items()},
    }
    write_log(log_entry)


def setup_logging(level="INFO", log_dir=None):
    """Replace loguru's default handler: stderr at `level`, plus hourly JSON-lines files when log_dir is set."""
    global _log_dir
    logger.remove()
    logger.add(sys.stderr, format=LOG_FORMAT, level=level)
    if log_dir:
        _log_dir = log_dir
        os.makedirs(log_dir, exist_ok=True)
        logger.add(json_sink, level="DEBUG")


def generate_file_name(timestamp):
    return os.path.join(_log_dir, f"log_{timestamp.strftime('%Y-%m-%d_%H')}.json")


def write_log(log_entry):
    timestamp = datetime.fromisoformat(log_entry['time'])
    file_name = generate_file_name(timestamp)
    with open(file_name, 'a') as f:
        json.dump(log_entry, f)
        f.write('\n')
