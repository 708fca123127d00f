import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pseudorot.config import ExperimentConfig, SolverConfig
from pseudorot.errors import ContractViolation

pow2 = st.sampled_from([8, 16, 32, 64, 128, 256])
alphas = st.one_of(st.floats(0.01, 5.0), st.sampled_from(["3/5", "1/7", {"surd": [-1, 1, 5, 2]}]))
families = st.sampled_from([{"family": "rotation"}, {"family": "constant"},
                            {"family": "perturbed_rotation", "epsilon": 0.05}])


@st.composite
def configs(draw):
    solver = SolverConfig(newton_tol=draw(st.floats(1e-14, 1e-6)), Ns=draw(st.one_of(st.none(), pow2)),
                          Nt=draw(pow2), theta_count=draw(pow2), grid_nr=draw(st.sampled_from([33, 64, 65])))
    alpha = draw(alphas)
    depths = draw(st.lists(st.integers(1, 50), min_size=1, max_size=5))
    if isinstance(alpha, dict) and draw(st.booleans()):
        depths = f"convergents:{draw(st.integers(1, 6))}"  # only irrational alpha has convergent depths
    return ExperimentConfig(hamiltonian=draw(families), alpha=alpha, depths=depths, solver=solver,
                            seed=draw(st.integers(0, 2 ** 31)), options={"side": draw(st.sampled_from(["plus", "auto"]))})


class TestRoundTrip:
    @given(configs())
    def test_serialize_parse(self, cfg):
        back = ExperimentConfig.parse(cfg.serialize())
        assert back.to_dict() == cfg.to_dict()
        assert back.config_hash() == cfg.config_hash()

    @given(configs())
    def test_hash_ignores_key_order(self, cfg):
        doc = json.loads(cfg.serialize())
        shuffled = dict(reversed(list(doc.items())))
        assert ExperimentConfig.from_dict(shuffled).config_hash() == cfg.config_hash()

    def test_hash_sensitive(self):
        a = ExperimentConfig({"family": "rotation"}, alpha=0.6)
        b = ExperimentConfig({"family": "rotation"}, alpha=0.61)
        assert a.config_hash() != b.config_hash()

    def test_load(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text('{"hamiltonian": {"family": "rotation"}, "alpha": "3/5", "depths": [1, 2]}')
        cfg = ExperimentConfig.load(p)
        assert cfg.resolved_depths() == [1, 2] and float(cfg.alpha_value) == 0.6


class TestValidation:
    @pytest.mark.parametrize("solver", [{"Nt": 100}, {"Ns": 48}, {"newton_tol": 0}, {"grid_nr": 50},
                                        {"theta_count": 12}, {"iterations": 0}])
    def test_bad_solver(self, solver):
        with pytest.raises(ContractViolation):
            ExperimentConfig.from_dict({"hamiltonian": {"family": "rotation"}, "alpha": 0.6, "solver": solver})

    @pytest.mark.parametrize("doc", [
        {"alpha": 0.6},
        {"hamiltonian": {"family": "rotation"}, "alpha": 0.6, "colour": "red"},
        {"hamiltonian": {"family": "rotation"}, "alpha": 0.6, "solver": {"nt": 128}},
        {"hamiltonian": {"family": "rotation"}, "alpha": 0.6, "depths": [0]},
        {"hamiltonian": {"family": "rotation"}, "alpha": 0.6, "depths": "fibonacci"},
        {"hamiltonian": "rotation", "alpha": 0.6},
    ])
    def test_bad_document(self, doc):
        with pytest.raises(ContractViolation):
            ExperimentConfig.from_dict(doc)

    def test_not_json(self):
        with pytest.raises(ContractViolation):
            ExperimentConfig.parse("{hamiltonian: rotation")

    def test_convergents_of_rational(self):
        with pytest.raises(ContractViolation):
            ExperimentConfig({"family": "rotation"}, alpha="1/7", depths="convergents:4")

    def test_convergents_depths(self):
        cfg = ExperimentConfig({"family": "rotation"}, alpha={"surd": [-1, 1, 5, 2]}, depths="convergents:6")
        assert cfg.resolved_depths() == [1, 2, 3, 5, 8, 13]

    def test_alpha_from_hamiltonian(self):
        cfg = ExperimentConfig({"family": "rotation", "alpha": 0.25})
        assert float(cfg.alpha_value) == 0.25
        with pytest.raises(ContractViolation):
            ExperimentConfig({"family": "constant"}).alpha_value
