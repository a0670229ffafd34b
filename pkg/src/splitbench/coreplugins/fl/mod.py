from ...lib.providers.services import service
from .engine import FlConfig, fl_client as _fl_client, run_fl as _run_fl


@service()
async def run_fl(config: FlConfig, workload, transports, collector=None):
    """FedAvg coordinator: returns the per-round metrics series."""
    return await _run_fl(config, workload, transports, collector)


@service()
async def fl_client(config: FlConfig, workload, endpoint, client_id):
    """FedAvg client worker; returns when the coordinator sends BYE."""
    return await _fl_client(config, workload, endpoint, client_id)
