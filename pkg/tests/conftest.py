import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ci", max_examples=25, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("ci")


class LinearModel:
    """``f(w) = A w + g`` with an explicit Jacobian; used as an oracle model."""

    label = "linear"
    param_bounds = None

    def __init__(self, A, g=None, w0=None):
        self.A = np.asarray(A, dtype=float)
        self.n_dofs = self.A.shape[0]
        self.g = np.zeros(self.n_dofs) if g is None else np.asarray(g, dtype=float)
        self.w0 = np.ones(self.n_dofs) if w0 is None else np.asarray(w0, dtype=float)

    def velocity(self, w, t, mu):
        return self.A @ w + self.g

    def velocity_jacobian(self, w, t, mu):
        return self.A.copy()

    def initial_state(self, mu):
        return self.w0.copy()

    def stencil_closure(self, rows):
        return np.arange(self.n_dofs)

    def velocity_rows(self, w, t, mu, rows):
        return self.velocity(w, t, mu)[rows]

    def jacobian_rows(self, w, t, mu, rows):
        cols = np.arange(self.n_dofs)
        return cols, self.A[np.asarray(rows)][:, cols]

    def check_parameters(self, mu):
        return np.atleast_1d(mu)


@pytest.fixture
def linear_model_factory():
    return LinearModel


def rel(a, b):
    return np.linalg.norm(np.asarray(a) - np.asarray(b)) / max(np.linalg.norm(b), 1e-300)


BURGERS_TRAIN = [(a, b) for a in (1.2, 1.3, 1.4, 1.5) for b in (0.02, 0.025)]
BURGERS_ONLINE = [(1.35, 0.0229), (1.45, 0.0201)]


class BurgersData:
    def __init__(self):
        from stlspg.models import burgers_model
        from stlspg.tensor_decomp import build_state_tensor
        from stlspg.time_integration import TimeGrid, backward_euler_scheme, solve_fom

        self.model = burgers_model()
        self.scheme = backward_euler_scheme()
        self.grid = TimeGrid.uniform(2.5e-4, 2000)
        self.train_mu = np.array(BURGERS_TRAIN)
        self.online_mu = np.array(BURGERS_ONLINE)
        self.train = [solve_fom(self.model, self.scheme, self.grid, mu) for mu in BURGERS_TRAIN]
        self.online = [solve_fom(self.model, self.scheme, self.grid, mu) for mu in BURGERS_ONLINE]
        self.tensor = build_state_tensor(self.train)


@pytest.fixture(scope="session")
def burgers_data():
    return BurgersData()


# acceptance report -------------------------------------------------------------------------
ACCEPTANCE_LINES = {}


def record_acceptance(key, ok, detail):
    """Store one pass/fail line; printed in the terminal summary."""
    line = f"{key}: {'PASS' if ok else 'FAIL'} | {detail}"
    ACCEPTANCE_LINES[key] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
