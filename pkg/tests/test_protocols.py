import numpy as np
import pytest

from cloneqkd.protocols import BB84, R04, alphabet, get_protocol, protocol_state, sift_rule
from cloneqkd.qstate import bloch_vector
from oracles import eq


class TestStates:
    def test_r04_alice_zero(self):
        assert np.allclose(protocol_state("r04", "alice", 0), [1, 1] / np.sqrt(2))

    def test_r04_bob_two(self):
        assert np.allclose(protocol_state("r04", "bob", 2), eq(5 * np.pi / 3))

    def test_bb84_alice_three(self):
        assert np.allclose(protocol_state("bb84", "alice", 3), np.array([1, -1j]) / np.sqrt(2))

    @pytest.mark.parametrize("spec,role,n", [("r04", "alice", 3), ("bb84", "bob", 4), ("r04", "bob", -1)])
    def test_out_of_range(self, spec, role, n):
        with pytest.raises(IndexError):
            protocol_state(spec, role, n)

    def test_bad_role(self):
        with pytest.raises(ValueError):
            protocol_state("bb84", "eve", 0)

    def test_unknown_protocol(self):
        with pytest.raises(ValueError, match="unknown protocol"):
            get_protocol("b92")

    @pytest.mark.parametrize("spec", [BB84, R04])
    @pytest.mark.parametrize("role", ["alice", "bob"])
    def test_equatorial(self, spec, role):
        for ket in alphabet(spec, role):
            assert abs(bloch_vector(ket)[2]) < 1e-12

    def test_anti_trine_orthogonality(self):
        for n in range(3):
            b = protocol_state(R04, "bob", (n + 1) % 3)
            assert abs(np.vdot(b, protocol_state(R04, "alice", n))) < 1e-12

    def test_bb84_bases_orthogonal(self):
        for n in range(4):
            a, b = protocol_state(BB84, "alice", n), protocol_state(BB84, "alice", (n + 2) % 4)
            assert abs(np.vdot(a, b)) < 1e-12


class TestSifting:
    def test_r04_conclusive_example(self):
        out = sift_rule("r04", "!b_0")[(0, 1)]
        assert out.conclusive and out.k == 1 and out.l == 0

    def test_r04_inconclusive(self):
        table = sift_rule("r04", 0)
        assert all(not v.conclusive for (j, _), v in table.items() if j == 2)

    def test_r04_bit_assignment(self):
        for n in range(3):
            table = sift_rule("r04", n)
            assert table[(n, (n + 1) % 3)].k == 1
            assert table[((n + 1) % 3, (n + 1) % 3)].k == 0
            assert {v.l for (j, b), v in table.items() if v.conclusive and b == (n + 1) % 3} == {0}
            assert {v.l for (j, b), v in table.items() if v.conclusive and b == (n + 2) % 3} == {1}

    def test_bb84_basis_mismatch(self):
        # Alice in X (index 0), Bob announces Y
        table = sift_rule("bb84", "Y")
        assert not table[(0, 1)].conclusive
        assert table[(1, 1)].conclusive

    def test_bb84_bits(self):
        for y in (0, 1):
            table = sift_rule("bb84", y)
            for k in (0, 1):
                for l in (0, 1):
                    assert table[(2 * k + y, 2 * l + y)] == (True, k, l)

    @pytest.mark.parametrize("bad", ["!b_3", "b_x", "Z", 1.5, True, -1, "!!b_0"])
    def test_malformed(self, bad):
        spec = "bb84" if bad == "Z" else "r04"
        with pytest.raises(ValueError):
            sift_rule(spec, bad)

    @pytest.mark.parametrize("spec", [BB84, R04])
    def test_total_and_deterministic(self, spec):
        for c in spec.contexts:
            a, b = sift_rule(spec, c), sift_rule(spec, c)
            assert a == b
            assert len(a) == spec.n_alice * 2

    def test_conclusive_rates(self):
        assert BB84.conclusive_rate == 0.5
        assert R04.conclusive_rate == pytest.approx(2 / 3)
