import pytest

from sicheck.errors import LimitExceededError
from sicheck.histories import INIT_TXN
from sicheck.oracle import OracleLimits, induced_graph, oracle_check

from conftest import aborted, committed, mk_history


class TestOracleCheck:
    def test_long_fork_rejected(self, long_fork):
        # All six orderings of the three x-writers fail, whatever y does.
        assert not oracle_check(long_fork).satisfiable

    def test_single_writer_per_key_accepted(self):
        history = mk_history(
            [
                [committed([("w", "x", 1)])],
                [committed([("r", "x", 1), ("w", "y", 2)])],
                [committed([("r", "y", 2)])],
            ]
        )
        verdict = oracle_check(history)
        assert verdict.satisfiable
        assert verdict.witness_orders == {"x": ((0, 0),), "y": ((1, 0),)}

    def test_lost_update_rejected_under_both_orders(self, lost_update):
        assert not oracle_check(lost_update).satisfiable

    def test_causality_rejected(self, causality_violation):
        assert not oracle_check(causality_violation).satisfiable

    def test_gate_failure_short_circuits(self):
        history = mk_history([[aborted([("w", "x", 9)])], [committed([("r", "x", 9)])]])
        verdict = oracle_check(history)
        assert not verdict.satisfiable
        assert verdict.gate.aborted_reads

    def test_self_sourced_read_rejected(self):
        # A transaction reads the value only its own later write produces:
        # no valid writer-reader relation exists.
        history = mk_history([[committed([("r", "x", 5), ("w", "x", 5)])]])
        assert not oracle_check(history).satisfiable

    def test_limits(self, long_fork):
        with pytest.raises(LimitExceededError):
            oracle_check(long_fork, OracleLimits(max_txns=3))
        with pytest.raises(LimitExceededError):
            oracle_check(long_fork, OracleLimits(max_writers_per_key=2))

    def test_isomorphism_invariance(self, long_fork):
        # Renaming keys and renumbering sessions must not change the verdict.
        def relabel(history):
            remap = {"x": "zz", "y": "aa"}
            sessions = []
            for sid, session in zip(history.session_ids, history.sessions):
                txns = []
                for t in session:
                    ops = tuple(
                        type(op)(op.kind, remap[op.key], op.value) for op in t.ops
                    )
                    txns.append(type(t)((sid + 10, t.id[1]), t.status, ops))
                sessions.append((sid + 10, txns))
            return type(history).build(sessions)

        assert oracle_check(long_fork).satisfiable == oracle_check(relabel(long_fork)).satisfiable

    def test_short_circuits_on_first_witness(self):
        history = mk_history(
            [[committed([("w", "x", 1)])], [committed([("w", "x", 2)])]]
        )
        verdict = oracle_check(history)
        assert verdict.satisfiable
        # Lexicographically first order over the writer pair.
        assert verdict.witness_orders == {"x": ((0, 0), (1, 0))}


class TestInducedGraph:
    def test_no_rw_is_identity_on_non_rw(self):
        deps = [((0, 0), (1, 0), "WR", "x"), ((1, 0), (2, 0), "SO", None)]
        assert induced_graph(deps) == {
            ((0, 0), (1, 0), "WR"),
            ((1, 0), (2, 0), "SO"),
        }

    def test_composition_self_loop(self):
        b, c = (1, 0), (2, 0)
        deps = [(b, c, "WW", "k"), (c, b, "RW", "k")]
        assert (b, b, "WW∘RW") in induced_graph(deps)

    def test_writer_reader_composition_matches_direct_pair(self):
        t, t_prime, s = (0, 0), (1, 0), (2, 0)
        deps = [
            (t, t_prime, "WR", "x"),
            (t_prime, s, "RW", "x"),
            (t, s, "WW", "x"),
        ]
        out = induced_graph(deps)
        assert (t, s, "WR∘RW") in out
        assert (t, s, "WW") in out  # same pair, labels ignored for cycles
