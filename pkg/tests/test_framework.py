"""Validity checking and audit record tests."""

import itertools
import json
import threading

import pytest

from scid import framework as fw
from scid.synth import ComponentLibrary, semantics_enumerator


def xor_table(width):
    return tuple(((a ^ b),) for a, b in
                 itertools.product(range(1 << width), repeat=2))


def all_two_input_tables(width):
    """Every function (2 inputs -> 1 output) at the given width, as tables.
    Fully enumerable only at width 1 (256 functions); width 2 would be
    4**16 tables."""
    domain = 1 << (2 * width)
    for combo in itertools.product(range(1 << width), repeat=domain):
        yield tuple((v,) for v in combo)


def lib_of(names, inputs=2, outputs=1, width=2):
    return ComponentLibrary.from_json(json.dumps(
        {"width": width, "inputs": inputs, "outputs": outputs,
         "components": list(names)}))


class TestCheckValidity:
    def test_same_space_never_invalid(self):
        space = [1, 2, 3, 4]
        for pred in (lambda x: x == 2, lambda x: x > 10):
            verdict = fw.check_validity_by_enumeration(space, space, pred)
            assert verdict != fw.INVALID

    def test_xor_library_valid_for_xor(self):
        target = xor_table(1)
        verdict = fw.check_validity_by_enumeration(
            all_two_input_tables(1),
            lambda: semantics_enumerator(lib_of(["xor"], width=1)),
            lambda table: table == target,
        )
        assert verdict == fw.VALID

    def test_and_library_invalid_for_xor(self):
        # Full function space at width 1; no composition of ANDs is xor.
        target = xor_table(1)
        verdict = fw.check_validity_by_enumeration(
            all_two_input_tables(1),
            lambda: semantics_enumerator(lib_of(["and", "and", "and"], width=1)),
            lambda table: table == target,
        )
        assert verdict == fw.INVALID

    def test_and_library_misses_xor_at_width_two(self):
        # The restricted side stays exhaustively checkable at width 2.
        target = xor_table(2)
        tables = set(semantics_enumerator(lib_of(["and", "and", "and"], width=2)))
        assert target not in tables

    def test_vacuous(self):
        verdict = fw.check_validity_by_enumeration(
            [1, 2, 3], [1], lambda x: False)
        assert verdict == fw.VACUOUS

    def test_budget_error_distinct_from_verdicts(self):
        with pytest.raises(fw.EnumerationBudgetError):
            fw.check_validity_by_enumeration(
                range(10_000), range(3), lambda x: False, budget=100)

    def test_pure_function_repeats_agree(self):
        args = (lambda: iter([1, 2, 3]), lambda: iter([3]), lambda x: x == 3)
        assert (fw.check_validity_by_enumeration(*args)
                == fw.check_validity_by_enumeration(*args) == fw.VALID)

    def test_agrees_with_double_loop(self):
        # Independent oracle: plain double loop over both spaces.
        import random
        rng = random.Random(5)
        for _ in range(50):
            cs = [rng.randrange(40) for _ in range(rng.randrange(1, 30))]
            ch = [rng.choice(cs) if rng.random() < 0.5 else rng.randrange(40)
                  for _ in range(rng.randrange(1, 10))]
            threshold = rng.randrange(40)
            pred = lambda x, t=threshold: x >= t
            any_cs = any(pred(x) for x in cs)
            any_ch = any(pred(x) for x in ch)
            want = fw.VACUOUS if not any_cs else (fw.VALID if any_ch else fw.INVALID)
            assert fw.check_validity_by_enumeration(cs, ch, pred) == want


class TestHypothesisDescriptor:
    def test_size_matches_enumerator(self):
        h = fw.StructureHypothesisDescriptor(
            "three things", 3, lambda: iter([1, 2, 3]))
        h.check_enumerator()

    def test_size_mismatch(self):
        h = fw.StructureHypothesisDescriptor("liar", 4, lambda: iter([1, 2]))
        with pytest.raises(fw.AuditError):
            h.check_enumerator()

    def test_duplicates_rejected(self):
        h = fw.StructureHypothesisDescriptor("dups", 2, lambda: iter([1, 1]))
        with pytest.raises(fw.AuditError):
            h.check_enumerator()


class TestAuditRecords:
    def test_sound_under_assumed_needs_waiver(self):
        with pytest.raises(fw.AuditError):
            fw.record_audit("hyperbox", fw.ASSUMED, fw.SOUND_RESULT)

    def test_waiver_allows_conditional_claim(self):
        rec = fw.record_audit("hyperbox", fw.ASSUMED, fw.SOUND_RESULT, waiver=True)
        assert rec.waiver

    def test_checked_sound_ok(self):
        log = fw.AuditLog()
        rec = fw.record_audit("hyperbox", fw.CHECKED_BY_ENUMERATION,
                              fw.SOUND_RESULT, log=log)
        assert log.records == (rec,)

    def test_unrealizable_never_claims_soundness(self):
        rec = fw.record_audit("components", fw.ASSUMED, fw.UNREALIZABLE)
        assert rec.run_outcome == fw.UNREALIZABLE

    def test_problem_instance_nonempty(self):
        with pytest.raises(ValueError):
            fw.ProblemInstance("", "platform", "bound")

    def test_jsonl_round_trip(self, tmp_path):
        path = tmp_path / "audit.jsonl"
        log = fw.AuditLog(str(path))
        fw.record_audit("a", fw.PROVED, fw.SOUND_RESULT, log=log)
        fw.record_audit("b", fw.ASSUMED, fw.UNKNOWN, log=log)
        loaded = fw.AuditLog.load(str(path))
        assert [r["hypothesis"] for r in loaded] == ["a", "b"]

    def test_concurrent_appends_serialize(self, tmp_path):
        path = tmp_path / "audit.jsonl"
        log = fw.AuditLog(str(path))

        def worker(i):
            for _ in range(50):
                fw.record_audit(f"h{i}", fw.PROVED, fw.SOUND_RESULT, log=log)

        threads = [threading.Thread(target=worker, args=(i,)) for i in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert len(fw.AuditLog.load(str(path))) == 200
