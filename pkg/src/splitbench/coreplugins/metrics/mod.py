from loguru import logger

from ...lib.providers.hooks import hook


@hook()
async def round_done(record):
    logger.info("model {model} round {round}: acc {acc:.4f} loss {loss:.4f} tx {tx} rx {rx} "
                "({ms:.0f} ms, {session:.0f} ms in session)",
                model=record.model, round=record.round, acc=record.accuracy, loss=record.loss,
                tx=record.tx_bytes, rx=record.rx_bytes, ms=record.wall_ms, session=record.session_ms)
