import numpy as np
import pytest

from app.core.exceptions import ConfigError, EvalPointError, ProtocolAbort
from app.crypto.circuit import fixed_forward
from app.crypto.sharing import reconstruct
from app.models.network import prefix_cut
from app.protocol.cost import LAN, WAN, estimate_latency, get_profile
from app.protocol.session import run_crypto_layers, run_session
from app.protocol.wire import HEADER_SIZE
from app.schemas.eval_point import EvalPoint
from app.schemas.session import SessionConfig, SessionSeeds, TcpTransport


def _config(point: str, **kwargs) -> SessionConfig:
    return SessionConfig(boundary=EvalPoint.parse(point), seeds=SessionSeeds(session=3), **kwargs)


def _tensor_bytes(*shapes) -> int:
    return sum(4 + 4 * len(shape) + 8 * int(np.prod(shape)) for shape in shapes)


class TestRunSession:
    def test_logits_match_plaintext(self, toy_model, dataset):
        x = dataset.images[:2]
        result = run_session(toy_model, x, _config("2.5"))
        np.testing.assert_allclose(result.output, toy_model.forward_full(x), atol=1e-3)
        np.testing.assert_allclose(result.server_activation, toy_model.forward_prefix(x, EvalPoint.parse("2.5")), atol=1e-3)

    def test_argmax_reveal(self, toy_model, dataset):
        x = dataset.images[:3]
        result = run_session(toy_model, x, _config("1.5", reveal_result="argmax"))
        np.testing.assert_array_equal(result.output, np.argmax(toy_model.forward_full(x), axis=1))

    def test_boundary_shares_equal_fixed_point_oracle(self, toy_model, dataset):
        x = dataset.images[:1]
        point = EvalPoint.parse("2")
        client, server, _ = run_crypto_layers(toy_model, x, _config("2"))
        oracle = fixed_forward(toy_model.spec, toy_model.weights, x, prefix_cut(toy_model.spec, point))
        np.testing.assert_array_equal(reconstruct(client, server), oracle)

    def test_noise_stays_within_lambda(self, toy_model, dataset):
        x = dataset.images[:2]
        point = EvalPoint.parse("1.5")
        result = run_session(toy_model, x, _config("1.5", noise_lambda=0.2))
        diff = result.server_activation - toy_model.forward_prefix(x, point)
        assert np.max(np.abs(diff)) <= 0.2 + 1e-3
        assert np.max(np.abs(diff)) > 0

    def test_lambda_alias(self):
        assert SessionConfig.model_validate({"boundary": "1", "lambda": 0.3}).noise_lambda == 0.3

    def test_unknown_boundary(self, toy_model, dataset):
        with pytest.raises(EvalPointError):
            run_session(toy_model, dataset.images[:1], _config("7"))

    def test_dealer_exhaustion_aborts_crypto_phase(self, toy_model, dataset):
        with pytest.raises(ProtocolAbort) as exc:
            run_session(toy_model, dataset.images[:1], _config("1.5", dealer_slot_limit=3))
        assert exc.value.phase == "crypto"
        assert "exhausted" in exc.value.detail

    def test_dealer_slots(self, toy_model, dataset):
        # conv: triple + 절단 / relu: 부호 + triple / 2×2 maxpool: relu 3 회
        assert run_session(toy_model, dataset.images[:1], _config("1")).dealer_slots == 2
        assert run_session(toy_model, dataset.images[:1], _config("1.5")).dealer_slots == 10

    def test_tcp_matches_in_process(self, toy_model, dataset):
        x = dataset.images[:1]
        local = run_session(toy_model, x, _config("1.5"))
        remote = run_session(toy_model, x, _config("1.5", transport=TcpTransport()))
        np.testing.assert_array_equal(local.output, remote.output)
        assert local.transcript.bytes_total == remote.transcript.bytes_total


class TestTranscript:
    def test_single_conv_byte_count(self, toy_model, dataset):
        x = dataset.images[:1]
        _, _, transcript = run_crypto_layers(toy_model, x, _config("1"))
        x_shape, w_shape, z_shape = (1, 3, 8, 8), (8, 3, 3, 3), (1, 8, 8, 8)
        expected = (
            _tensor_bytes(x_shape)  # 입력 share
            + _tensor_bytes(x_shape, w_shape, z_shape)  # 딜러 → 서버 triple
            + _tensor_bytes(x_shape, w_shape)  # 클라이언트 → 딜러 요청
            + _tensor_bytes(z_shape)  # 딜러 → 클라이언트 c
            + 2 * _tensor_bytes(x_shape, w_shape)  # 공개값 교환
            + 4 * _tensor_bytes(z_shape)  # 절단 왕복
            + 10 * HEADER_SIZE
        )
        assert transcript.totals["crypto"].bytes == expected
        assert transcript.rounds == 5

    def test_totals_are_conserved(self, toy_model, dataset):
        transcript = run_session(toy_model, dataset.images[:1], _config("2.5")).transcript
        assert transcript.bytes_total == sum(entry.wire_bytes for entry in transcript.ledger)
        assert transcript.bytes_total == sum(t.bytes for t in transcript.totals.values())
        assert {"setup", "crypto", "reveal", "clear"} <= set(transcript.totals)

    def test_client_server_traffic_is_independent_of_input(self, toy_model, dataset):
        config = _config("2")
        _, _, first = run_crypto_layers(toy_model, dataset.images[:1], config)
        _, _, second = run_crypto_layers(toy_model, dataset.images[-1:], config)

        def link(transcript):
            return [
                (e.round, e.msg_type, e.payload_bytes, e.digest)
                for e in transcript.entries("crypto")
                if {e.sender, e.receiver} == {"client", "server"}
            ]

        assert link(first) and link(first) == link(second)
        assert [e.payload_bytes for e in first.ledger] == [e.payload_bytes for e in second.ledger]

    def test_deeper_boundary_costs_more(self, toy_model, dataset):
        x = dataset.images[:1]
        _, _, shallow = run_crypto_layers(toy_model, x, _config("1"))
        _, _, deep = run_crypto_layers(toy_model, x, _config("2.5"))
        assert deep.totals["crypto"].bytes > shallow.totals["crypto"].bytes
        assert deep.rounds > shallow.rounds

    def test_same_seeds_same_transcript(self, toy_model, dataset):
        x = dataset.images[:1]
        first = run_session(toy_model, x, _config("1.5")).transcript
        second = run_session(toy_model, x, _config("1.5")).transcript
        assert first.to_artifact_json() == second.to_artifact_json()


class TestLatency:
    def test_estimate(self, toy_model, dataset):
        _, _, transcript = run_crypto_layers(toy_model, dataset.images[:1], _config("1"))
        crypto = transcript.totals["crypto"].bytes
        lan = estimate_latency(transcript, LAN)
        wan = estimate_latency(transcript, WAN)
        assert lan.seconds == pytest.approx(crypto / 384e6 + transcript.rounds * 0.3e-3)
        assert wan.seconds == pytest.approx(crypto / 44e6 + transcript.rounds * 40e-3)
        assert wan.seconds > lan.seconds

    def test_profile_lookup(self):
        assert get_profile("WAN") == WAN
        with pytest.raises(ConfigError):
            get_profile("satellite")


@pytest.mark.slow
def test_tiny_vgg8_matches_plaintext_over_many_inputs():
    from app.models.network import TrainedModel
    from app.models.zoo import build_spec, init_weights

    spec = build_spec("tiny_vgg8", (3, 16, 16), 4)
    model = TrainedModel(spec, init_weights(spec, 1))
    x = np.random.default_rng(0).uniform(size=(200, 3, 16, 16))
    result = run_session(model, x, _config(model.points[-1].render()))
    plain = model.forward_full(x)
    assert np.max(np.abs(result.output - plain)) <= 1e-3
    assert np.mean(np.argmax(result.output, axis=1) == np.argmax(plain, axis=1)) >= 0.99
