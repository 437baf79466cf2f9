"""Least-squares physical identification and sequential residual training."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DivergedLoss, RankDeficient
from .models import BlackBoxModel, PgnnModel, PhysicalModel
from .nn import Adam, NNParams, mse_and_gradient
from .regressors import RegressorSet, RegressorSpec, input_transform

log = logging.getLogger(__name__)


def fit_physical(regs: RegressorSet, spec: RegressorSpec = RegressorSpec()) -> PhysicalModel:
    """Least-squares ``theta`` for ``u ~ theta_J*delta^2 y + theta_fv*delta y``.

    Solved through the 2x2 normal equations.  Raises ``RankDeficient`` when
    the Gram matrix is numerically singular, e.g. for standstill-only data.
    """
    probe = PhysicalModel(0.0, 0.0, spec)
    A = probe.features(regs.phi)
    u = np.asarray(regs.u, dtype=float)
    if len(u) < 2:
        raise RankDeficient("need at least two regressors")
    G = A.T @ A
    b = A.T @ u
    eig = np.linalg.eigvalsh(G)
    if not (eig[-1] > 0 and eig[0] > 1e-12 * eig[-1]):
        raise RankDeficient(f"Gram matrix is singular (eigenvalues {eig[0]:.3g}, {eig[-1]:.3g})")
    theta = np.linalg.solve(G, b)
    res = u - A @ theta
    model = PhysicalModel(float(theta[0]), float(theta[1]), spec, float(np.sqrt(np.mean(res ** 2))))
    if model.theta_inertia <= 0:
        log.warning("identified inertia %.3g is not positive", model.theta_inertia)
    return model


@dataclass(frozen=True)
class TrainConfig:
    """Network training hyperparameters.

    ``batch_size = 0`` means full batch.  ``regularization`` is the scalar
    weight of ``|theta_NN|^2`` (a multiple of the identity).  ``subsample``
    keeps every n-th regressor.  Training stops with ``DivergedLoss`` if the
    loss turns non-finite or grows past ``divergence_factor`` times its
    initial value.  ``optimizer = "lbfgs"`` swaps Adam for scipy's L-BFGS-B
    (full batch, ``epochs`` iterations), with ``restarts`` seeded
    initializations of which the lowest loss is kept.
    """

    hidden: int = 16
    optimizer: str = "adam"
    learning_rate: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    epochs: int = 2000
    batch_size: int = 0
    seed: int = 0
    regularization: float = 0.0
    subsample: int = 1
    lr_decay: float = 1.0
    divergence_factor: float = 1e6
    restarts: int = 1

    def __post_init__(self):
        if self.optimizer not in ("adam", "lbfgs"):
            raise ConfigError(f"train.optimizer must be 'adam' or 'lbfgs', got {self.optimizer!r}")
        if int(self.restarts) != self.restarts or self.restarts < 1:
            raise ConfigError("train.restarts must be an integer >= 1")
        if not self.learning_rate > 0:
            raise ConfigError("train.learning_rate must be > 0")
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ConfigError("train.epochs must be an integer >= 1")
        if int(self.hidden) != self.hidden or self.hidden < 1:
            raise ConfigError("train.hidden must be an integer >= 1")
        if self.batch_size < 0 or self.subsample < 1:
            raise ConfigError("train.batch_size must be >= 0 and train.subsample >= 1")
        if self.regularization < 0:
            raise ConfigError("train.regularization must be >= 0")
        if not 0 < self.lr_decay <= 1:
            raise ConfigError("train.lr_decay must be in (0, 1]")


@dataclass
class TrainResult:
    model: object
    loss_history: np.ndarray
    best_epoch: int
    extra: dict = field(default_factory=dict)

    @property
    def final_loss(self) -> float:
        return float(self.loss_history[self.best_epoch])


def _scale(x: np.ndarray) -> np.ndarray:
    s = np.max(np.abs(x), axis=0)
    return np.where(s > 0, s, 1.0)


def fit_network(X: np.ndarray, target: np.ndarray, config: TrainConfig,
                nn: NNParams | None = None) -> tuple[NNParams, np.ndarray, int]:
    """Minimize ``mean((target - nn(X))^2) + reg*|theta|^2``.

    Uses Adam by default and L-BFGS-B when ``config.optimizer`` asks for it.

    ``X`` and ``target`` are already scaled.  Returns the parameters of the
    epoch with the lowest objective, the per-epoch objective history
    (entry ``i`` is evaluated before update ``i``; the last entry is after
    the final update) and the best epoch index.
    """
    if config.optimizer == "lbfgs":
        return _fit_lbfgs(X, target, config)
    rng = np.random.default_rng(config.seed)
    if nn is None:
        nn = NNParams.init(X.shape[1], config.hidden, rng)
    opt = Adam(nn.flat(), config.learning_rate, config.beta1, config.beta2)
    n = len(target)
    bs = config.batch_size if 0 < config.batch_size < n else n
    history = np.empty(config.epochs + 1)
    best_loss, best_theta, best_epoch = math.inf, opt.theta.copy(), 0
    lr = config.learning_rate
    initial = None
    for epoch in range(config.epochs + 1):
        loss, grad = mse_and_gradient(nn, X, target, config.regularization)
        history[epoch] = loss
        if initial is None:
            initial = loss
        if not math.isfinite(loss) or loss > config.divergence_factor * max(initial, 1e-300):
            raise DivergedLoss(f"training loss diverged at epoch {epoch} (loss={loss:.3g})")
        if loss < best_loss:
            best_loss, best_theta, best_epoch = loss, opt.theta.copy(), epoch
        if epoch == config.epochs:
            break
        if bs == n:
            opt.step(grad, lr)
        else:
            order = rng.permutation(n)
            for start in range(0, n, bs):
                idx = order[start:start + bs]
                _, g = mse_and_gradient(nn, X[idx], target[idx], config.regularization)
                opt.step(g, lr)
                nn = nn.unflat(opt.theta)
        nn = nn.unflat(opt.theta)
        lr *= config.lr_decay
    return nn.unflat(best_theta), history, best_epoch


def _fit_lbfgs(X: np.ndarray, target: np.ndarray, config: TrainConfig):
    from scipy.optimize import minimize

    best = None
    for r in range(config.restarts):
        rng = np.random.default_rng([config.seed, r])
        nn0 = NNParams.init(X.shape[1], config.hidden, rng)
        history = []

        def objective(theta):
            loss, grad = mse_and_gradient(nn0.unflat(theta), X, target, config.regularization)
            history.append(loss)
            return loss, grad

        res = minimize(objective, nn0.flat(), jac=True, method="L-BFGS-B",
                       options={"maxiter": config.epochs, "ftol": 1e-16, "gtol": 1e-12})
        loss, _ = mse_and_gradient(nn0.unflat(res.x), X, target, config.regularization)
        if not math.isfinite(loss):
            raise DivergedLoss("L-BFGS produced a non-finite loss")
        if best is None or loss < best[0]:
            best = (loss, nn0.unflat(res.x), np.array(history + [loss]))
    loss, nn, history = best
    return nn, history, len(history) - 1


def _train(X: np.ndarray, residual: np.ndarray, config: TrainConfig):
    in_scale = _scale(X)
    out_scale = float(np.max(np.abs(residual))) or 1.0
    nn, hist, best = fit_network(X / in_scale, residual / out_scale, config)
    # report the objective in the units of u; the penalty is stated on the scaled target
    return nn, in_scale, out_scale, hist * out_scale ** 2, best


def train_residual(regs: RegressorSet, physical: PhysicalModel, config: TrainConfig = TrainConfig(),
                   transform: str = "physics_guided") -> TrainResult:
    """Second step of the sequential procedure: fit the network to what
    the frozen physical model leaves unexplained."""
    regs = regs.subsample(config.subsample)
    spec = physical.regressor
    if len(regs) == 0:
        raise ValueError("no regressors")
    residual = regs.u - physical.predict(regs.phi)
    X = input_transform(regs.phi, spec) if transform == "physics_guided" else np.asarray(regs.phi)
    nn, in_scale, out_scale, hist, best = _train(X, residual, config)
    model = PgnnModel(physical, nn, in_scale, out_scale, transform, spec)
    return TrainResult(model, hist, best, {"physical_only_loss": float(np.mean(residual ** 2))})


def train_blackbox(regs: RegressorSet, config: TrainConfig = TrainConfig(),
                   spec: RegressorSpec = RegressorSpec()) -> TrainResult:
    regs = regs.subsample(config.subsample)
    if len(regs) == 0:
        raise ValueError("no regressors")
    nn, in_scale, out_scale, hist, best = _train(np.asarray(regs.phi), np.asarray(regs.u), config)
    return TrainResult(BlackBoxModel(nn, in_scale, out_scale, spec), hist, best)
