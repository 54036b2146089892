from deconfound.seeds import rng_for, subseed


def test_subseed_deterministic():
    assert subseed(3, "folds") == subseed(3, "folds")


def test_subseed_varies_with_path():
    seen = {subseed(3), subseed(3, "a"), subseed(3, "b"), subseed(3, "a", 1),
            subseed(3, "a", 2), subseed(4, "a")}
    assert len(seen) == 6


def test_rng_for_reproducible_streams():
    a = rng_for(1, "x").standard_normal(4)
    b = rng_for(1, "x").standard_normal(4)
    assert (a == b).all()


def test_rng_for_independent_streams():
    a = rng_for(1, "x").standard_normal(4)
    b = rng_for(1, "y").standard_normal(4)
    assert (a != b).any()
