"""Monte Carlo harness: nonce -> round -> channel -> forgeries -> authenticator -> score.

Trial ``t`` draws all of its randomness from ``TrialStream(masterSeed, t)``,
so aggregated counters do not depend on chunking, worker count or execution
order.  Two engines share that contract: a per-round reference built from
the public operations, and a compiled batch kernel for the ideal-oracle /
parametric-channel case.  They produce identical counters.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor

from . import _mix
from ._mix import TrialStream
from .auth import (
    AuthVariant,
    OrderPolicy,
    authenticate_addressed,
    authenticate_exhaustive,
    authenticate_heuristic,
    inject_spoof,
)
from .channels import GaussianToy, Parametric, TableDriven
from .mac import IdealOracle, MacMode
from .model import (
    ConfigurationError,
    InfeasibleConfigurationError,
    KeyRegistry,
    Nonce,
    Scheme,
    SystemConfig,
    generate_round,
)
from .stats import RoundStats, score_round

log = logging.getLogger(__name__)


def default_registry(config: SystemConfig, master_seed: int) -> KeyRegistry:
    return KeyRegistry.generate(config.N, _mix.derive_seed(master_seed, _mix.REGISTRY_SEED))


def default_mode(master_seed: int) -> IdealOracle:
    return IdealOracle(_mix.derive_seed(master_seed, _mix.ORACLE_SEED))


def round_nonce(stream: TrialStream) -> Nonce:
    return Nonce(stream.trial, stream.word(_mix.NONCE, 0))


def run_round(t: int, config, channel, variant, registry, mode, master_seed,
              spoof_count=0, order=OrderPolicy.ASCENDING):
    """One trial end to end; returns ``(truth, decoded, outcomes)``."""
    variant = AuthVariant(variant)
    stream = TrialStream(master_seed, t)
    nonce = round_nonce(stream)
    truth = generate_round(config, registry, nonce, stream, mode)
    decoded = channel.apply(truth, stream)
    if spoof_count:
        p_dec = channel.decoding_probability(config)
        if p_dec is None:
            raise ConfigurationError("forgeries need a channel with a decoding probability")
        decoded = inject_spoof(decoded, spoof_count, stream, config, p_dec)
    if variant is AuthVariant.EXHAUSTIVE:
        outcomes = authenticate_exhaustive(decoded, registry, nonce, mode, config)
    elif variant is AuthVariant.HEURISTIC:
        outcomes = authenticate_heuristic(decoded, registry, nonce, mode, config, order, stream)
    else:
        outcomes = authenticate_addressed(decoded, registry, nonce, mode, config)
    return truth, decoded, outcomes


def _reference_chunk(t0, t1, config, channel, variant, registry, mode, master_seed,
                     spoof_count, order) -> RoundStats:
    total = RoundStats()
    for t in range(t0, t1):
        truth, decoded, outcomes = run_round(t, config, channel, variant, registry, mode,
                                             master_seed, spoof_count, order)
        total.add(score_round(truth, decoded, outcomes, spoof_count))
    return total


def kernel_supported(config: SystemConfig, channel, mode, variant) -> bool:
    return (
        isinstance(mode, IdealOracle)
        and isinstance(channel, (Parametric, TableDriven))
        and config.scheme is not Scheme.BARE
        and config.D <= 64 and config.L <= 64 and config.A <= 64
        and config.B < 62 and 2**config.B >= 2 * config.K
        and not (variant is AuthVariant.ADDRESSED and config.scheme is not Scheme.ADDRESS_MAC)
    )


def _chunk(args) -> RoundStats:
    engine, t0, t1, config, channel, variant, registry, mode, master_seed, spoof_count, order = args
    if engine == "kernel":
        from ._kernels import run_kernel_chunk

        return run_kernel_chunk(t0, t1, config, channel.decoding_probability(config), variant,
                                registry, mode, master_seed, spoof_count, order)
    return _reference_chunk(t0, t1, config, channel, variant, registry, mode, master_seed,
                            spoof_count, order)


def run_trials(config: SystemConfig, channel, variant: AuthVariant | str, trials: int,
               master_seed: int, spoof_count: int = 0, *, mode: MacMode | None = None,
               order: OrderPolicy | str = OrderPolicy.ASCENDING, registry: KeyRegistry | None = None,
               workers: int = 1, engine: str = "auto") -> RoundStats:
    """Aggregate counters over ``trials`` independent rounds.

    ``engine`` is ``"auto"`` (kernel when supported), ``"kernel"`` or
    ``"reference"``.  Results are identical for any ``workers``.
    """
    variant = AuthVariant(variant)
    order = OrderPolicy(order)
    if trials < 1:
        raise ConfigurationError("trials must be >= 1")
    if spoof_count < 0:
        raise ConfigurationError("spoofCount must be >= 0")
    if variant is AuthVariant.ADDRESSED and config.scheme is not Scheme.ADDRESS_MAC:
        raise ConfigurationError("Addressed authentication requires the AddressMac scheme")
    if isinstance(channel, GaussianToy):
        channel.check(config)
    if 2**min(config.B, 64) < config.K:
        raise InfeasibleConfigurationError("fewer messages than list entries")
    mode = default_mode(master_seed) if mode is None else mode
    registry = default_registry(config, master_seed) if registry is None else registry
    if len(registry) != config.N:
        raise ConfigurationError("registry size differs from N")
    ok = kernel_supported(config, channel, mode, variant)
    if engine == "auto":
        engine = "kernel" if ok else "reference"
    elif engine == "kernel" and not ok:
        raise ConfigurationError("batch kernel does not support this configuration")
    elif engine not in ("kernel", "reference"):
        raise ConfigurationError(f"unknown engine {engine!r}")
    if engine == "kernel":
        registry.oracle_words()

    nchunks = max(1, workers) * 4 if workers > 1 else 1
    bounds = [trials * i // nchunks for i in range(nchunks + 1)]
    jobs = [(engine, bounds[i], bounds[i + 1], config, channel, variant, registry, mode,
             master_seed, spoof_count, order)
            for i in range(nchunks) if bounds[i + 1] > bounds[i]]
    log.debug("run_trials: %d trials, engine=%s, %d chunks", trials, engine, len(jobs))
    if workers <= 1:
        parts = [_chunk(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk, jobs))
    total = RoundStats()
    for part in parts:
        total.add(part)
    return total
