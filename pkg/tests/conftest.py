import numpy as np

from nsflow.apps import DampingPolicy, MechanicalModel


def linear_constraint_model(A: np.ndarray, kappa: float, damping_policy: DampingPolicy) -> MechanicalModel:
    """Unit-mass mechanics with linear constraints A q >= 0."""
    n, m_q = A.shape
    return MechanicalModel(
        m_q=m_q,
        n=n,
        mass_matrix=lambda q: np.eye(m_q),
        forcing=lambda q, qd: np.zeros(m_q),
        constraints=lambda q: A @ q,
        constraint_jac=lambda q: A.copy(),
        kappa=np.full(n, kappa),
        damping_policy=damping_policy,
    )


def particle_model(damping_policy: DampingPolicy, kappa: float = 5.0, n: int = 3) -> MechanicalModel:
    """Three linear constraints making an activating corner at the origin."""
    A = np.array([[1.0, 0.2, 0.0], [0.0, 1.0, -0.1], [0.3, 0.0, 1.0]])[:n]
    return linear_constraint_model(A, kappa, damping_policy)
