from ...lib.providers.services import service
from .engine import ensemble_client as _ensemble_client, run_ensemble as _run_ensemble


@service()
async def run_ensemble(config, workload, transports, collector=None):
    """Rotation-scheduled multi-model SplitNN: returns {model index: metrics series}."""
    return await _run_ensemble(config, workload, transports, collector)


@service()
async def ensemble_client(config, workload, endpoint, client_id):
    return await _ensemble_client(config, workload, endpoint, client_id)
