"""Four-state rate model of a driven two-level emitter with two charge
parities.

States are ordered ``[(0,+), (1,+), (0,-), (1,-)]`` (qubit level, parity);
all serialization uses this order.  The model couples

* drive-induced population exchange within each parity at the rate
  ``exchange = Gamma * Omega^2 / (Gamma^2 + 4 d^2)`` for a tone detuned by
  ``d`` from that parity's transition (``Omega^2/Gamma`` when resonant),
* spontaneous decay ``Gamma`` downward within each parity,
* parity switches: ``(q,P) -> (q,-P)`` at ``gamma0`` for either qubit level,
  plus a decay-assisted channel ``(1,P) -> (0,-P)`` at ``gamma1``.
  Parity switches that would excite the qubit are energetically suppressed
  and omitted.

``gamma0`` and ``gamma1`` are slow laboratory rates (1/s); ``gamma``,
``omega`` and ``delta`` are angular (rad/s).  The stationary state is
computed with the GTH (state-reduction) algorithm, which keeps componentwise
relative accuracy even when the drive rates exceed the parity rates by many
orders of magnitude.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateModelError, ValidationError

STATE_LABELS = ("0+", "1+", "0-", "1-")
FOUR_STATE_PARITY = (+1, +1, -1, -1)

SINGLE_TONE = "single"
DUAL_TONE = "dual"


@dataclass(frozen=True)
class RateModel:
    """Rates of the four-state parity/qubit process.

    Parameters
    ----------
    gamma0 : float
        Qubit-state-independent parity-switch rate (1/s).
    gamma1 : float
        Additional decay-assisted parity-switch rate from the excited
        state (1/s).
    gamma : float
        Emitter decay rate into the waveguide (rad/s), > 0.
    omega : float
        Rabi rate of the drive tone(s) (rad/s).
    delta : float
        Parity detuning ``w01_plus - w01_minus`` (rad/s).
    drive_mode : str
        ``"single"``: one tone resonant with the + parity; the - parity is
        driven off-resonantly through the same tone.  ``"dual"``: one
        resonant tone per parity, each parity additionally seeing the other
        tone detuned by ``delta``.
    n_th : float
        Optional thermal occupation of the waveguide; adds ``gamma * n_th``
        upward rates within each parity.  Default 0.
    """

    gamma0: float
    gamma1: float
    gamma: float
    omega: float
    delta: float
    drive_mode: str = SINGLE_TONE
    n_th: float = 0.0

    def __post_init__(self):
        if self.gamma0 < 0 or self.gamma1 < 0 or self.omega < 0 or self.n_th < 0:
            raise ValidationError("rates must be >= 0")
        if self.gamma <= 0:
            raise ValidationError(f"gamma must be > 0, got {self.gamma}")
        if self.drive_mode not in (SINGLE_TONE, DUAL_TONE):
            raise ValidationError(f"unknown drive mode {self.drive_mode!r}")

    @property
    def x(self):
        """Normalized drive strength Omega/Gamma."""
        return self.omega / self.gamma

    def exchange_rates(self):
        """Drive-induced exchange rate within (+, -) parity (1/s each)."""
        resonant = exchange_rate(self.gamma, self.omega, 0.0)
        cross = exchange_rate(self.gamma, self.omega, self.delta)
        if self.drive_mode == SINGLE_TONE:
            return resonant, cross
        return resonant + cross, resonant + cross


def exchange_rate(gamma, omega, detuning):
    """Population exchange rate ``Gamma W^2 / (Gamma^2 + 4 d^2)`` of a
    detuned tone (rad/s in, 1/s out)."""
    return gamma * omega * omega / (gamma * gamma + 4.0 * detuning * detuning)


@dataclass(frozen=True)
class Generator:
    """Markov generator ``dp/dt = A p`` over the four-state order above."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.asarray(self.matrix, dtype=float)
        if a.shape != (4, 4):
            raise ValidationError(f"generator must be 4x4, got {a.shape}")
        off = a.copy()
        np.fill_diagonal(off, 0.0)
        if np.any(off < 0):
            raise ValidationError("off-diagonal rates must be >= 0")
        scale = max(np.max(np.abs(a)), 1.0)
        if np.max(np.abs(a.sum(axis=0))) > 1e-12 * scale:
            raise ValidationError("generator columns must sum to zero")

    @property
    def exit_rates(self):
        """Total exit rate from each state, ``-diag(A)``."""
        return -np.diag(self.matrix)


def build_generator(model):
    """Assemble the four-state generator for a :class:`RateModel`.

    Column ``j`` holds the rates out of state ``j``; ``A[i, j]`` is the rate
    of ``j -> i`` transitions and the diagonal closes each column to zero.
    """
    ex_p, ex_m = model.exchange_rates()
    g0, g1, g = model.gamma0, model.gamma1, model.gamma
    up = g * model.n_th

    a = np.zeros((4, 4))
    # drive exchange and decay within + parity
    a[1, 0] += ex_p + up
    a[0, 1] += ex_p + g
    # within - parity
    a[3, 2] += ex_m + up
    a[2, 3] += ex_m + g
    # parity switches preserving the qubit level
    a[2, 0] += g0
    a[0, 2] += g0
    a[3, 1] += g0
    a[1, 3] += g0
    # decay-assisted parity switches (no qubit-exciting counterpart)
    a[2, 1] += g1
    a[0, 3] += g1
    np.fill_diagonal(a, 0.0)
    np.fill_diagonal(a, -a.sum(axis=0))
    return Generator(a)


def steady_state(generator):
    """Stationary distribution of the generator.

    Uses the GTH state-reduction algorithm (no subtractions), giving
    componentwise relative accuracy independent of the spread between fast
    drive rates and slow parity rates.

    Returns
    -------
    ndarray
        Probabilities over ``[(0,+), (1,+), (0,-), (1,-)]`` summing to 1.

    Raises
    ------
    DegenerateModelError
        If the stationary distribution is not unique (disconnected slow
        manifold, e.g. all parity-switch rates zero).
    """
    q = np.array(generator.matrix.T, dtype=float)  # rows = from-state
    n = q.shape[0]
    s = np.empty(n)
    for k in range(n - 1, 0, -1):
        s[k] = q[k, :k].sum()
        if not s[k] > 0:
            raise DegenerateModelError(
                "stationary state is not unique (no path from state "
                f"{STATE_LABELS[k]} to lower states after reduction)"
            )
        q[k, :k] /= s[k]
        for i in range(k):
            q[i, :k] += q[i, k] * q[k, :k]
    p = np.empty(n)
    p[0] = 1.0
    for k in range(1, n):
        p[k] = (p[:k] @ q[:k, k]) / s[k]
    return p / p.sum()


def mean_parity(populations):
    """Average parity ``(p0+ + p1+) - (p0- + p1-)`` of a population vector."""
    p = np.asarray(populations, dtype=float)
    if p.shape != (4,):
        raise ValidationError("expected a 4-entry population vector")
    if np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-9:
        raise ValidationError("populations must be a probability vector")
    return float((p[0] + p[1]) - (p[2] + p[3]))


def gamma_p_closed_form(gamma0, gamma1, gamma, delta, x):
    """Closed-form average parity-switch rate for the single-tone drive.

    Leading-order stationary rate in the limit ``gamma0, gamma1 << gamma``
    (the laboratory regime, where the separation is ~7 orders of magnitude);
    the relative correction is O((gamma0 + gamma1)/gamma).

    Parameters are as in :class:`RateModel`; ``x = omega/gamma``.
    """
    x2 = x * x
    c1 = 4.0 * delta * delta
    c2 = gamma * gamma
    u = gamma0 + (2.0 * gamma0 + gamma1) * x2
    w = 2.0 * x2 + 1.0
    num = u * (c1 * gamma0 + c2 * u)
    den = gamma1 * x2 * (2.0 * delta * delta + c2 * w) + gamma0 * w * (c1 + c2 * w)
    return num / den


def gamma_p_steady(model):
    """Average parity-switch rate from the exact stationary state:
    ``gamma0 + (p1+ + p1-) * gamma1`` (1/s).  Works for either drive mode."""
    p = steady_state(build_generator(model))
    return model.gamma0 + (p[1] + p[3]) * model.gamma1


def parity_exit_rates(model):
    """Effective telegraph rates (exit from +, exit from -) in 1/s.

    Adiabatic reduction over the fast qubit dynamics: within parity P the
    excited-state weight is ``pi1 = e/(2e + gamma)`` for exchange rate ``e``,
    and the parity exits at ``gamma0 + pi1 * gamma1``.  Valid when
    ``gamma0 + gamma1 << gamma`` (relative corrections of that order).
    """
    ex_p, ex_m = model.exchange_rates()
    pi1_p = ex_p / (2.0 * ex_p + model.gamma)
    pi1_m = ex_m / (2.0 * ex_m + model.gamma)
    return (
        model.gamma0 + pi1_p * model.gamma1,
        model.gamma0 + pi1_m * model.gamma1,
    )


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-constant jump record of a continuous-time Markov process.

    ``times[k]`` is when the process enters ``states[k]``; the first entry is
    at t = 0 and the last interval extends to ``total_time``.  ``parities``
    maps each state index to +1/-1 so that consumers needing only the charge
    parity are independent of the microscopic state set.
    """

    times: np.ndarray = field(repr=False)
    states: np.ndarray = field(repr=False)
    total_time: float
    seed: int
    parities: tuple
    ended_early: bool = False

    def __post_init__(self):
        if self.times.size != self.states.size or self.times.size == 0:
            raise ValidationError("times and states must be equal-length, non-empty")
        if self.times[0] != 0.0:
            raise ValidationError("first interval must start at t = 0")
        if np.any(np.diff(self.times) <= 0):
            raise ValidationError("jump times must be strictly increasing")
        if np.any(self.states[1:] == self.states[:-1]):
            raise ValidationError("self-jumps are not allowed")

    @property
    def n_jumps(self):
        return self.times.size - 1

    def state_parities(self):
        """Parity (+1/-1) of each interval."""
        par = np.asarray(self.parities)
        return par[self.states]

    def parity_switch_times(self):
        """Times of intervals that started with a parity flip."""
        par = self.state_parities()
        flips = np.nonzero(par[1:] != par[:-1])[0] + 1
        return self.times[flips]

    def occupancy(self, n_states=None):
        """Total time spent in each state."""
        if n_states is None:
            n_states = len(self.parities)
        dt = np.diff(np.concatenate([self.times, [self.total_time]]))
        return np.bincount(self.states, weights=dt, minlength=n_states)


def sample_trajectory(generator, total_time, seed, max_jumps=50_000_000, initial_state=None):
    """Exact stochastic (Gillespie) sample of the four-state process.

    Exponential holding times with the state's total exit rate, next state
    drawn proportionally to the off-diagonal column rates.  The initial
    state is drawn from the stationary distribution unless given explicitly
    (models with absorbing structure have no unique stationary state).
    Reproducible per seed.

    Intended for validation at moderate rate scales; the number of events
    grows with the fast drive rates, so use
    :func:`sample_parity_trajectory` for long laboratory-scale records.
    """
    if total_time <= 0:
        raise ValidationError("total_time must be > 0")
    a = generator.matrix
    n = a.shape[0]
    rng = np.random.default_rng(seed)

    if initial_state is None:
        probs = steady_state(generator)
        state = int(rng.choice(n, p=probs))
    else:
        state = int(initial_state)
        if not 0 <= state < n:
            raise ValidationError(f"initial_state must be in [0, {n})")

    exit_rates = generator.exit_rates
    jump_probs = []
    targets = []
    for j in range(n):
        col = a[:, j].copy()
        col[j] = 0.0
        idx = np.nonzero(col > 0)[0]
        targets.append(idx)
        jump_probs.append(np.cumsum(col[idx]) / col[idx].sum() if idx.size else None)

    times = [0.0]
    states = [state]
    t = 0.0
    ended_early = False
    for _ in range(max_jumps):
        rate = exit_rates[state]
        if rate <= 0:
            ended_early = True
            break
        t += rng.exponential(1.0 / rate)
        if t >= total_time:
            break
        state = int(targets[state][np.searchsorted(jump_probs[state], rng.random())])
        times.append(t)
        states.append(state)
    else:
        raise ValidationError(
            f"trajectory exceeded {max_jumps} jumps; rates too fast for this horizon"
        )

    return Trajectory(
        times=np.asarray(times),
        states=np.asarray(states, dtype=np.int8),
        total_time=float(total_time),
        seed=int(seed),
        parities=FOUR_STATE_PARITY,
        ended_early=ended_early,
    )


def sample_parity_trajectory(model, total_time, seed):
    """Sample the charge-parity telegraph of the model (states: 0 -> parity +,
    1 -> parity -).

    Uses the adiabatically reduced exit rates of :func:`parity_exit_rates`,
    exact for the parity marginal up to O((gamma0+gamma1)/gamma) corrections.
    This is what makes minutes-long records at MHz-scale drive rates
    tractable: only the slow parity switches are realized.
    """
    if total_time <= 0:
        raise ValidationError("total_time must be > 0")
    rate_p, rate_m = parity_exit_rates(model)
    if rate_p <= 0 or rate_m <= 0:
        raise DegenerateModelError("parity process has a zero exit rate")
    rng = np.random.default_rng(seed)

    # stationary occupation of the two-state telegraph
    q_plus = rate_m / (rate_p + rate_m)
    first = 0 if rng.random() < q_plus else 1

    # draw dwell times in alternating blocks until the horizon is covered
    times = [np.array([0.0])]
    state = first
    t = 0.0
    block = 256
    while True:
        seq = np.where((np.arange(block) + state) % 2 == 0, rate_p, rate_m)
        jumps = t + np.cumsum(rng.exponential(1.0 / seq))
        keep = jumps < total_time
        times.append(jumps[keep])
        if not keep.all():
            break
        t = jumps[-1]
        state = (state + block) % 2

    jump_times = np.concatenate(times)
    states = ((np.arange(jump_times.size) + first) % 2).astype(np.int8)
    return Trajectory(
        times=jump_times,
        states=states,
        total_time=float(total_time),
        seed=int(seed),
        parities=(+1, -1),
    )
