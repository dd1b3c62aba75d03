import pytest

from weakpovm import verify


@pytest.mark.parametrize("suite", ["identities", "composition", "ancilla", "hitting", "weakness"])
def test_suites_pass(suite):
    results = verify.run_suite(suite, seeds=9, base_seed=3)
    checks = results[suite]
    assert checks
    failed = [(c.name, c.residual, c.tol) for c in checks if not c.passed]
    assert not failed


def test_all_runs_every_suite():
    assert set(verify.run_suite("all", seeds=3)) == set(verify.SUITES)


def test_unknown_suite():
    with pytest.raises(KeyError):
        verify.run_suite("nope")


def test_check_semantics():
    assert verify.Check("a", 1e-11, 1e-10).passed
    assert not verify.Check("a", float("nan"), 1e-10).passed


def test_family_is_deterministic():
    a = [inst.m1 for inst, _ in verify.instrument_family(6, 1)]
    b = [inst.m1 for inst, _ in verify.instrument_family(6, 1)]
    assert all((x == y).all() for x, y in zip(a, b))
    dims = [inst.dim for inst, _ in verify.instrument_family(9, 0)]
    assert dims == [2, 2, 2, 3, 3, 3, 4, 4, 4]
