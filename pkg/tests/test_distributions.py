import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from platoonvn import DiscretePmf, EmpiricalDistribution, TabulatedPdf


@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=30))
def test_from_masses_invariants(raw):
    m = np.array(raw)
    pmf = DiscretePmf.from_masses(m / max(m.sum(), 1.0), "bell")
    assert np.all((pmf.masses >= 0) & (pmf.masses <= 1))
    assert pmf.masses.sum() + pmf.tail_mass == pytest.approx(1.0, abs=1e-9)
    assert pmf.tail_mass >= 0


def test_pmf_validation():
    with pytest.raises(ValueError):
        DiscretePmf(np.array([0.5, 0.2]), 0.0, "bell")
    with pytest.raises(ValueError):
        DiscretePmf(np.array([1.0]), 0.0, "magic")
    with pytest.raises(ValueError):
        DiscretePmf.from_masses(np.array([0.9, 0.3]), "bell")
    fixed = DiscretePmf.from_masses(np.array([0.9, 0.3]), "bell", normalize=True)
    assert fixed.meta["excess_mass"] == pytest.approx(0.2)


def test_pmf_moments_truncation_and_csv(tmp_path):
    pmf = DiscretePmf.from_masses(np.array([0.25, 0.5, 0.25]), "mixture")
    assert pmf.mean() == pytest.approx(1.0) and pmf.variance() == pytest.approx(0.5)
    t = pmf.truncated(1)
    assert t.tail_mass == pytest.approx(0.25) and t.p(5) == 0.0
    assert np.array_equal(pmf.padded(4), [0.25, 0.5, 0.25, 0.0, 0.0])
    pmf.to_csv(tmp_path / "p.csv", {"seed": 3})
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert json.loads(lines[0][2:]) == {"seed": 3} and lines[1] == "n,p"
    assert json.loads(pmf.to_json())["provenance"] == "mixture"


def test_tabulated_pdf():
    x = np.linspace(0.0, 5.0, 501)
    pdf = TabulatedPdf(x, np.exp(-x), False)
    assert pdf.integral() == pytest.approx(1 - np.exp(-5), rel=1e-4)
    assert pdf(2.5) == pytest.approx(np.exp(-2.5), rel=1e-6)
    assert pdf(7.0) == 0.0
    assert float(np.sum(pdf.trapezoid_weights())) == pytest.approx(pdf.integral())
    with pytest.raises(ValueError):
        TabulatedPdf(x[::-1], np.exp(-x))
    with pytest.raises(ValueError):
        TabulatedPdf(x, -np.ones_like(x))


def test_empirical_distribution(tmp_path):
    d = EmpiricalDistribution(np.array([1, 2, 1]), 4, 0, 0, 1.0, "typical_load")
    assert d.mean() == pytest.approx(1.0) and d.n_max == 2
    assert d.pmf().masses.sum() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        EmpiricalDistribution(np.array([1, 2]), 4, 0, 0, 1.0, "typical_load")
    EmpiricalDistribution(np.array([10, 20]), 4, 0, 0, 1.0, "typical_load", pooled=True)
    d.to_csv(tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text().splitlines()[1] == "n,count,q"
