from ...lib.providers.services import service
from .engine import SplitConfig, run_split as _run_split, split_client as _split_client


@service()
async def run_split(config: SplitConfig, workload, transports, collector=None):
    """SplitNN coordinator: returns the per-round metrics series."""
    return await _run_split(config, workload, transports, collector)


@service()
async def split_client(config: SplitConfig, workload, endpoint, client_id):
    return await _split_client(config, workload, endpoint, client_id)
