import pytest

from petitio.corpus_run import load_script, load_theory


THEORIES = ["oandz", "eandr1", "eandr1_triv", "vacuous", "eandr2", "eandr2_triv",
            "eandrho", "eandrho_triv", "campbell", "bank_manager",
            "barker_simple", "barker_masked"]


@pytest.fixture(scope="session")
def corpus():
    return {name: load_theory(name) for name in THEORIES}


@pytest.fixture(scope="session")
def scripts():
    return {name: load_script(name) for name in
            ["oandz.God_re", "eandrho.God_re_ho", "eandrho.Greater_triv",
             "eandrho.Greater_triv1", "campbell.God_re_ho"]}
