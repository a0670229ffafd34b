import asyncio
import unittest

import numpy as np

from splitbench.coreplugins.split.engine import (
    SplitConfig,
    SplitCoordinator,
    SplitSession,
    client_handoff,
    split_client,
    split_client_epoch,
    split_server_session,
)
from splitbench.errors import EngineError, ProtocolError, ShapeError
from splitbench.lib.harness import byte_totals
from splitbench.lib.metrics import estimate_split_bytes
from splitbench.lib.nn import Optimizer, batch_rng, max_abs_diff, train_epoch
from splitbench.lib.schedule import handoff_count, visit_plan
from splitbench.lib.transport import Frame, FrameType, decode_tensors, encode_tensors, make_loopback
from splitbench.lib.zoo import initial_model, split_model, split_point

from .helpers import run, run_pair, tiny_workload


def run_split_local(config, workload, transport="loopback", taps=None):
    async def client_fn(client_id, endpoint):
        await split_client(config, workload, endpoint, client_id)

    return run(run_pair(lambda endpoints: SplitCoordinator(config, workload, endpoints),
                        client_fn, config.clients, transport, taps))


def split_estimate(config, workload, include_control=False):
    point = split_point(*workload.member(config.model_index))
    return estimate_split_bytes(point.smashed_shape, workload.plan.sizes, config.batch_size, config.rounds,
                                point.client_params, config.sync_mode, order=config.order(),
                                include_control=include_control)


class TestSplitEpoch(unittest.TestCase):

    def setUp(self):
        self.workload = tiny_workload(clients=1)
        self.parts = split_model(self.workload.spec, initial_model(self.workload.spec, 0), self.workload.cut)

    def _epoch(self, indices, batch_size, client_lr, server_lr):
        train = self.workload.train

        async def go():
            client_side, server_side = make_loopback()

            async def client():
                result = await split_client_epoch(self.parts.client, Optimizer("adam", client_lr), train.samples,
                                                  train.labels, indices, batch_size, batch_rng(0), client_side)
                await client_side.send(Frame(FrameType.ROUND_DONE))
                return result

            server = split_server_session(self.parts.server, Optimizer("adam", server_lr), server_side,
                                          self.parts.smashed_shape)
            return await asyncio.gather(client(), server)
        return run(go())

    def test_one_sample_one_exchange(self):
        (_, batches), (closing, losses) = self._epoch([3], 32, 0.01, 0.01)
        self.assertEqual(batches, 1)
        self.assertEqual(len(losses), 1)
        self.assertEqual(closing.type, FrameType.ROUND_DONE)

    def test_ragged_batches(self):
        (_, batches), (_, losses) = self._epoch(np.arange(11), 4, 0.01, 0.01)
        self.assertEqual(batches, 3)
        self.assertEqual(len(losses), 3)

    def test_zero_lr_client(self):
        client_before = self.parts.client.flatten().copy()
        server_before = self.parts.server.flatten().copy()
        self._epoch(np.arange(10), 4, 0.0, 0.01)
        np.testing.assert_array_equal(self.parts.client.flatten(), client_before)
        self.assertGreater(float(np.abs(self.parts.server.flatten() - server_before).max()), 0.0)

    def test_server_rejects_unexpected_frame(self):
        async def go():
            a, b = make_loopback()
            await a.send(Frame(FrameType.MODEL_UP))
            await split_server_session(self.parts.server, Optimizer(), b, self.parts.smashed_shape)
        with self.assertRaises(ProtocolError):
            run(go())

    def test_server_rejects_wrong_smashed_shape(self):
        async def go():
            a, b = make_loopback()
            acts = np.ones((2,) + tuple(self.parts.smashed_shape[:-1]) + (self.parts.smashed_shape[-1] + 1,))
            await a.send(Frame(FrameType.ACTIVATIONS, encode_tensors(acts, np.zeros(2))))
            await split_server_session(self.parts.server, Optimizer(), b, self.parts.smashed_shape)
        with self.assertRaises(ShapeError):
            run(go())

    def _serve_labels(self, labels):
        async def go():
            a, b = make_loopback()
            acts = np.ones((2,) + tuple(self.parts.smashed_shape), dtype=np.float32)
            await a.send(Frame(FrameType.ACTIVATIONS, encode_tensors(acts, np.asarray(labels, dtype=np.float32))))
            await split_server_session(self.parts.server, Optimizer(), b, self.parts.smashed_shape)
        run(go())

    def test_server_rejects_bad_labels(self):
        for labels in ([0, 7], [0, -1], [0.5, 1]):
            with self.assertRaises(ProtocolError, msg=str(labels)):
                self._serve_labels(labels)


class TestSplitSession(unittest.TestCase):

    def test_bad_labels_fail_the_visit(self):
        workload = tiny_workload(clients=1)
        config = SplitConfig(clients=1, rounds=1)
        coordinator_side, client_side = make_loopback()
        session = SplitSession(config, workload.spec, workload.cut, [coordinator_side])
        visit = visit_plan([0], 1, "relay")[0]

        async def go():
            await session.open_visit(visit)
            await client_side.recv()
            acts = np.ones((2,) + tuple(session.smashed_shape), dtype=np.float32)
            await client_side.send(Frame(FrameType.ACTIVATIONS, encode_tensors(acts, np.float32([0, 7]))))
            await session.train_visit(visit)
        with self.assertRaises(EngineError) as ctx:
            run(go())
        self.assertEqual(ctx.exception.client_id, 0)
        self.assertIsInstance(ctx.exception.__cause__, ProtocolError)

    def test_handoff_preconditions(self):
        workload = tiny_workload(clients=2)
        config = SplitConfig(clients=2, rounds=1)
        endpoints = [make_loopback()[0] for _ in range(2)]
        session = SplitSession(config, workload.spec, workload.cut, endpoints)
        first, second = visit_plan([0, 1], 1, "relay")
        with self.assertRaises(EngineError):
            run(client_handoff(session, first, first))
        with self.assertRaises(EngineError):
            run(client_handoff(session, first, second))

    def test_handoff_to_closed_client(self):
        workload = tiny_workload(clients=2)
        config = SplitConfig(clients=2, rounds=1)
        endpoints = [make_loopback()[0] for _ in range(2)]
        session = SplitSession(config, workload.spec, workload.cut, endpoints)
        run(endpoints[1].close())
        with self.assertRaises(EngineError):
            run(session.open_visit(visit_plan([0, 1], 1, "relay")[1]))

    def test_client_order_must_be_permutation(self):
        with self.assertRaises(EngineError):
            SplitConfig(clients=3, client_order=[0, 0, 1]).order()
        self.assertEqual(SplitConfig(clients=3, client_order=[2, 0, 1]).order(), [2, 0, 1])


class TestSplitNN(unittest.TestCase):

    def test_single_client_matches_monolithic_training(self):
        workload = tiny_workload(clients=1, n=200)
        config = SplitConfig(clients=1, rounds=10, batch_size=10, lr=0.01, seed=2, wall_clock=False)
        self.assertEqual(len(workload.shard(0)), 100)
        coordinator, series, _ = run_split_local(config, workload)

        reference = initial_model(workload.spec, config.seed)
        optimizer = Optimizer("adam", config.lr)
        for r in range(config.rounds):
            train_epoch(reference, optimizer, workload.train.samples, workload.train.labels, workload.shard(0),
                        config.batch_size, batch_rng(config.seed, 0, 0, r))
        self.assertEqual(optimizer.state.t, 100)
        self.assertLess(max_abs_diff(coordinator.full_model(), reference), 1e-5)
        self.assertEqual(len(series), config.rounds)

    def test_relay_hands_weights_on_exactly(self):
        workload = tiny_workload(clients=2)
        config = SplitConfig(clients=2, rounds=2, batch_size=4, wall_clock=False)
        log = []
        run_split_local(config, workload, taps=log)
        uploads = [frame.payload for client, way, frame in log
                   if way == "in" and frame.type == FrameType.CLIENT_WEIGHTS]
        relays = [(client, frame.payload) for client, way, frame in log
                  if way == "out" and frame.type == FrameType.CLIENT_WEIGHTS]
        self.assertEqual(len(uploads), 4)
        self.assertEqual([client for client, _ in relays], [1, 0, 1])
        self.assertEqual(len(relays), handoff_count(visit_plan(config.order(), config.rounds, config.sync_mode)))
        self.assertEqual([payload for _, payload in relays], uploads[:3])

    def test_frames_stay_on_the_right_side_of_the_cut(self):
        workload = tiny_workload(clients=3, n=90)
        config = SplitConfig(clients=3, rounds=2, batch_size=4, wall_clock=False)
        log = []
        coordinator, _, _ = run_split_local(config, workload, taps=log)
        smashed = coordinator.session.smashed_shape
        self.assertNotEqual(smashed, workload.spec.input_shape)

        upstream = {FrameType.ACTIVATIONS, FrameType.CLIENT_WEIGHTS, FrameType.ROUND_DONE}
        active = None
        for client, way, frame in log:
            if way == "out":
                if frame.type in (FrameType.TOKEN_PASS, FrameType.CLIENT_WEIGHTS):
                    self.assertIsNone(active)
                    active = client
                continue
            self.assertIn(frame.type, upstream)
            self.assertEqual(client, active)
            if frame.type == FrameType.ACTIVATIONS:
                acts, labels = decode_tensors(frame.payload, 2)
                self.assertEqual(acts.shape[1:], smashed)
                self.assertEqual(labels.shape, (acts.shape[0],))
            else:
                active = None

    def test_sync_none_sends_bare_tokens(self):
        workload = tiny_workload(clients=2)
        config = SplitConfig(clients=2, rounds=2, batch_size=8, sync_mode="none", wall_clock=False)
        log = []
        run_split_local(config, workload, taps=log)
        out = [frame.type for _, way, frame in log if way == "out" and frame.type != FrameType.GRADIENTS]
        self.assertEqual(out, [FrameType.TOKEN_PASS] * 4 + [FrameType.BYE] * 2)
        closing = [frame.type for _, way, frame in log
                   if way == "in" and frame.type != FrameType.ACTIVATIONS]
        self.assertEqual(closing, [FrameType.ROUND_DONE, FrameType.CLIENT_WEIGHTS] * 2)

    def test_bytes_match_estimate(self):
        workload = tiny_workload(clients=3, n=100, scheme="imbalanced", sigma=0.5)
        for sync_mode in ("relay", "none"):
            config = SplitConfig(clients=3, rounds=2, batch_size=8, sync_mode=sync_mode, wall_clock=False)
            counters = []
            for transport in ("loopback", "tcp"):
                _, series, endpoints = run_split_local(config, workload, transport)
                est = split_estimate(config, workload)
                self.assertEqual((series[-1].cum_tx, series[-1].cum_rx), est.totals())
                per_client_tx = [sum(r.client_tx[c] for r in series) for c in range(config.clients)]
                self.assertEqual(per_client_tx, [row.from_server for row in est.per_client])
                self.assertEqual(byte_totals(endpoints), split_estimate(config, workload, True).totals())
                counters.append([(r.cum_tx, r.cum_rx) for r in series])
            self.assertEqual(counters[0], counters[1])

    def test_single_client_has_no_handoffs(self):
        workload = tiny_workload(clients=1)
        config = SplitConfig(clients=1, rounds=3, batch_size=8, wall_clock=False)
        log = []
        run_split_local(config, workload, taps=log)
        relayed = [frame for _, way, frame in log if way == "out" and frame.type == FrameType.CLIENT_WEIGHTS]
        self.assertEqual(relayed, [])

    def test_deterministic(self):
        workload = tiny_workload(clients=2)
        config = SplitConfig(clients=2, rounds=2, batch_size=4, wall_clock=False)
        first = run_split_local(config, workload)
        second = run_split_local(config, workload)
        self.assertEqual(first[1], second[1])
        self.assertEqual(max_abs_diff(first[0].full_model(), second[0].full_model()), 0.0)


if __name__ == '__main__':
    unittest.main()
