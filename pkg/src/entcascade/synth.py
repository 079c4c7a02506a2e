"""Seeded synthetic ledgers with six class-dependent behavioural profiles.

The ledger opens with one genesis coinbase funding every wallet's hot address.
Each subsequent transaction is one action by a labeled entity (or by a user
toward one). Every spend of a labeled entity includes its hot address, so the
co-input clustering of the output recovers each entity exactly. A closing
sweep per entity spends whatever is still funded.

Per-row signal lives in amounts, fees, fan-in/fan-out, address reuse, loop
rate and returning counterparties. Entity-level totals are dominated by a
per-entity activity scale, and Exchange/Service and Gambling/Marketplace are
configured with matching amount levels so their aggregates overlap.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .classes import CLASSES, SATOSHI_PER_BTC
from .errors import BudgetTooSmall
from .ingest import LabelBook, RawTransaction
from .ml.rng import generator

EXCHANGE, GAMBLING, MARKETPLACE, MINING_POOL, MIXER, SERVICE = CLASSES

MIXER_DENOMINATIONS_BTC = (0.1, 0.5, 1.0, 5.0)
COINBASE_REWARD = 1_250_000_000
DUST = 546


@dataclass(frozen=True)
class ClassProfile:
    """Behavioural parameters of one class."""

    activity: float  # share weight of the action budget
    amount_btc: float  # median payment size
    amount_sigma: float
    fee_sat: int  # median fee
    address_reuse_rate: float
    self_transfer_rate: float
    fan_out: tuple[int, int]  # payees per outgoing payment, inclusive
    max_inputs: int  # funded addresses consolidated per spend (plus the hot address)
    inbound_share: float  # fraction of non-self actions that are users paying in
    partners: int = 0  # fixed counterparties (0: any user)


DEFAULT_PROFILES: dict[str, ClassProfile] = {
    EXCHANGE: ClassProfile(1.0, 0.40, 1.1, 20_000, 0.10, 0.10, (2, 6), 4, 0.5),
    GAMBLING: ClassProfile(1.0, 0.05, 0.8, 6_000, 0.80, 0.10, (1, 1), 2, 0.55),
    MARKETPLACE: ClassProfile(1.0, 0.05, 0.9, 30_000, 0.70, 0.10, (1, 2), 8, 0.65, partners=4),
    MINING_POOL: ClassProfile(1.0, 0.04, 0.6, 12_000, 0.0, 0.10, (5, 12), 2, 0.45, partners=30),
    MIXER: ClassProfile(1.0, 0.50, 0.0, 80_000, 0.0, 0.20, (2, 5), 3, 0.5),
    SERVICE: ClassProfile(1.0, 0.40, 1.1, 15_000, 0.85, 0.05, (1, 3), 2, 0.5, partners=6),
}


@dataclass(frozen=True)
class SynthConfig:
    n_entities_per_class: dict[str, int] = field(default_factory=lambda: dict.fromkeys(CLASSES, 10))
    tx_budget: int = 50_000
    n_users: int | None = None  # default: budget // 125, clamped to [4, 400]
    profiles: dict[str, ClassProfile] = field(default_factory=lambda: dict(DEFAULT_PROFILES))
    scale_sigma: float = 0.8  # lognormal spread of per-entity activity
    max_address_uses: int = 12
    label_fraction: float = 0.2  # share of non-hot addresses listed in the label book
    start_time: int = 1_500_000_000
    block_interval: int = 600
    max_block_txs: int = 8
    seed: int = 0

    def validate(self) -> None:
        counts = self.n_entities_per_class
        if not counts or any(c < 1 for c in counts.values()):
            raise ValueError("every configured class needs at least one entity")
        unknown = set(counts) - set(CLASSES)
        if unknown:
            raise ValueError(f"unknown classes {sorted(unknown)}")
        for name in counts:
            p = self.profiles[name]
            for rate in (p.address_reuse_rate, p.self_transfer_rate, p.inbound_share):
                if not 0.0 <= rate <= 1.0:
                    raise ValueError(f"{name}: rates must lie in [0, 1]")
        if not 0.0 <= self.label_fraction <= 1.0:
            raise ValueError("label_fraction must lie in [0, 1]")
        total = sum(counts.values())
        if self.tx_budget < total + 2:
            raise BudgetTooSmall(
                f"tx_budget {self.tx_budget} cannot cover genesis, {total} closing sweeps and one action"
            )

    @property
    def users(self) -> int:
        if self.n_users is not None:
            return self.n_users
        return min(400, max(4, self.tx_budget // 125))

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        d = dict(d)
        if "profiles" in d:
            profiles = dict(DEFAULT_PROFILES)
            for name, overrides in d["profiles"].items():
                base = profiles[name].__dict__ | overrides
                for key in ("fan_out",):
                    base[key] = tuple(base[key])
                profiles[name] = ClassProfile(**base)
            d["profiles"] = profiles
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "n_entities_per_class": dict(self.n_entities_per_class),
            "tx_budget": self.tx_budget,
            "n_users": self.n_users,
            "profiles": {k: dict(v.__dict__, fan_out=list(v.fan_out)) for k, v in self.profiles.items()},
            "scale_sigma": self.scale_sigma,
            "max_address_uses": self.max_address_uses,
            "label_fraction": self.label_fraction,
            "start_time": self.start_time,
            "block_interval": self.block_interval,
            "max_block_txs": self.max_block_txs,
            "seed": self.seed,
        }


@dataclass
class Wallet:
    name: str
    cls: str | None
    hot: str
    scale: float = 1.0
    addresses: list[str] = field(default_factory=list)
    funded: dict[str, None] = field(default_factory=dict)  # insertion-ordered set
    live: list[str] = field(default_factory=list)  # reusable receive addresses
    uses: dict[str, int] = field(default_factory=dict)
    partners: list[int] = field(default_factory=list)
    recent: list[int] = field(default_factory=list)  # recent paying users


@dataclass
class SynthResult:
    ledger: list[RawTransaction]
    labels: LabelBook
    truth: dict[str, str]  # entity name -> class
    owner: dict[str, str]  # address -> wallet name (labeled entities and users)
    stats: dict[str, dict[str, float]]

    def truth_csv(self) -> str:
        lines = ["entity_name,class"]
        lines += [f"{name},{cls}" for name, cls in sorted(self.truth.items())]
        return "\n".join(lines) + "\n"


class _Builder:
    def __init__(self, config: SynthConfig) -> None:
        self.cfg = config
        self.rng = generator(config.seed, "synth")
        self.balance: dict[str, int] = {}
        self.owner: dict[str, Wallet] = {}
        self.n_addr = 0
        self.txs: list[RawTransaction] = []
        self.block_time = config.start_time
        self.block_left = 0
        self.spends: dict[str, int] = {}
        self.self_spends: dict[str, int] = {}

    # -- addresses --------------------------------------------------------
    def new_address(self, w: Wallet) -> str:
        digest = hashlib.sha256(f"{self.cfg.seed}:addr:{self.n_addr}".encode()).hexdigest()
        self.n_addr += 1
        addr = "bc1q" + digest[:32]
        w.addresses.append(addr)
        self.owner[addr] = w
        self.balance[addr] = 0
        return addr

    def receive_address(self, w: Wallet, reuse_rate: float) -> str:
        if w.live and self.rng.random() < reuse_rate:
            addr = w.live[int(self.rng.integers(len(w.live)))]
        else:
            addr = self.new_address(w)
            if reuse_rate > 0:
                w.live.append(addr)
                if len(w.live) > 3:
                    w.live.pop(0)
        w.uses[addr] = w.uses.get(addr, 0) + 1
        if w.uses[addr] >= self.cfg.max_address_uses and addr in w.live:
            w.live.remove(addr)
        return addr

    # -- emission ---------------------------------------------------------
    def _timestamp(self) -> int:
        if self.block_left == 0:
            self.block_time += self.cfg.block_interval + int(self.rng.integers(-120, 121))
            self.block_left = int(self.rng.integers(1, self.cfg.max_block_txs + 1))
        self.block_left -= 1
        return self.block_time

    def emit(self, inputs: list[tuple[str, int]], outputs: list[tuple[str, int]]) -> RawTransaction:
        i = len(self.txs)
        tx_id = hashlib.sha256(f"{self.cfg.seed}:tx:{i}".encode()).hexdigest()
        for addr, value in inputs:
            if value <= 0 or value > self.balance[addr]:
                raise RuntimeError(f"bad spend of {value} from {addr} holding {self.balance[addr]}")
            self.balance[addr] -= value
            w = self.owner[addr]
            if self.balance[addr] == 0:
                w.funded.pop(addr, None)
        for addr, value in outputs:
            if value < 0:
                raise RuntimeError(f"negative output {value} to {addr}")
            self.balance[addr] += value
            w = self.owner[addr]
            if addr != w.hot and self.balance[addr] > 0:
                w.funded.setdefault(addr, None)
        ts = self.cfg.start_time if i == 0 else self._timestamp()
        tx = RawTransaction(tx_id, ts, tuple(inputs), tuple(outputs))
        self.txs.append(tx)
        return tx

    def amount(self, median_btc: float, sigma: float) -> int:
        z = self.rng.standard_normal() if sigma > 0 else 0.0
        return max(DUST, int(median_btc * SATOSHI_PER_BTC * math.exp(sigma * z)))

    def fee(self, median_sat: int) -> int:
        return max(200, int(median_sat * math.exp(0.35 * self.rng.standard_normal())))

    def spend(
        self,
        w: Wallet,
        payments: list[tuple[str, int]],
        fee: int,
        max_inputs: int,
    ) -> RawTransaction:
        """Pay from ``w``: hot address plus up to ``max_inputs`` funded addresses; change to a fresh address."""
        needed = sum(v for _, v in payments) + fee
        inputs: list[tuple[str, int]] = []
        for addr in list(w.funded)[:max_inputs]:
            inputs.append((addr, self.balance[addr]))
        have = sum(v for _, v in inputs)
        hot_part = max(needed - have, 0) + int(self.rng.integers(1_000, 50_000))
        hot_part = min(hot_part, self.balance[w.hot])
        if hot_part <= 0 or have + hot_part < needed:
            raise RuntimeError(f"wallet {w.name} ran dry; raise genesis funding")
        inputs.insert(0, (w.hot, hot_part))
        change = have + hot_part - needed
        outputs = list(payments)
        if change > 0:
            outputs.append((self.new_address(w), change))
        if w.cls is not None:
            self.spends[w.cls] = self.spends.get(w.cls, 0) + 1
        return self.emit(inputs, outputs)

    def self_transfer(self, w: Wallet, fee: int, max_inputs: int) -> RawTransaction:
        inputs = [(a, self.balance[a]) for a in list(w.funded)[:max_inputs]]
        hot_part = min(int(self.rng.integers(100_000, 5_000_000)) + fee, self.balance[w.hot])
        inputs.insert(0, (w.hot, hot_part))
        total = sum(v for _, v in inputs)
        if w.cls is not None:
            self.spends[w.cls] = self.spends.get(w.cls, 0) + 1
            self.self_spends[w.cls] = self.self_spends.get(w.cls, 0) + 1
        return self.emit(inputs, [(self.new_address(w), total - fee)])


def generate(config: SynthConfig = SynthConfig()) -> SynthResult:
    """Build a ledger, its label book and the ground-truth entity classes."""
    config.validate()
    b = _Builder(config)
    rng = b.rng

    users: list[Wallet] = []
    for u in range(config.users):
        w = Wallet(f"user-{u:04d}", None, "")
        w.hot = b.new_address(w)
        users.append(w)
    entities: list[Wallet] = []
    for cls in CLASSES:
        for j in range(config.n_entities_per_class.get(cls, 0)):
            w = Wallet(f"{cls}-{j:02d}", cls, "", scale=float(math.exp(config.scale_sigma * rng.standard_normal())))
            w.hot = b.new_address(w)
            p = config.profiles[cls]
            if p.partners:
                k = min(p.partners, len(users))
                w.partners = sorted(rng.choice(len(users), size=k, replace=False).tolist())
            entities.append(w)

    genesis = [(w.hot, 10_000 * SATOSHI_PER_BTC) for w in users]
    genesis += [(w.hot, int(200_000 * SATOSHI_PER_BTC * w.scale)) for w in entities]
    b.emit([], genesis)

    n_actions = config.tx_budget - 1 - len(entities)
    weights = np.array([config.profiles[w.cls].activity * w.scale for w in entities])
    # exact per-entity quotas, interleaved in random order
    quota = np.floor(weights / weights.sum() * n_actions).astype(int)
    remainder = n_actions - quota.sum()
    quota[np.argsort(-(weights / weights.sum() * n_actions - quota), kind="stable")[:remainder]] += 1
    schedule = np.repeat(np.arange(len(entities)), quota)
    schedule = schedule[rng.permutation(len(schedule))]

    actions: dict[str, Callable[..., None]] = {
        EXCHANGE: _exchange,
        GAMBLING: _gambling,
        MARKETPLACE: _marketplace,
        MINING_POOL: _mining_pool,
        MIXER: _mixer,
        SERVICE: _service,
    }
    for idx in schedule:
        w = entities[idx]
        p = config.profiles[w.cls]
        if rng.random() < p.self_transfer_rate:
            b.self_transfer(w, b.fee(p.fee_sat), p.max_inputs)
        else:
            actions[w.cls](b, w, p, users)

    for w in entities:
        if w.funded:
            fee = b.fee(config.profiles[w.cls].fee_sat)
            inputs = [(w.hot, fee + 1_000)] + [(a, b.balance[a]) for a in w.funded]
            total = sum(v for _, v in inputs)
            b.emit(inputs, [(w.hot, total - fee)])

    ledger = sorted(b.txs, key=lambda tx: tx.sort_key)
    entries: dict[str, tuple[str, str]] = {}
    for w in entities:
        entries[w.hot] = (w.name, w.cls)
        others = [a for a in w.addresses if a != w.hot]
        k = int(round(config.label_fraction * len(others)))
        if k:
            for i in rng.choice(len(others), size=k, replace=False):
                entries[others[i]] = (w.name, w.cls)
    truth = {w.name: w.cls for w in entities}
    owner = {a: w.name for a, w in b.owner.items()}

    stats: dict[str, dict[str, float]] = {}
    for cls in CLASSES:
        members = [i for i, w in enumerate(entities) if w.cls == cls]
        if not members:
            continue
        spends = b.spends.get(cls, 0)
        stats[cls] = {
            "actions": float(quota[members].sum()),
            "actions_per_entity": float(quota[members].mean()),
            "spends": float(spends),
            "self_transfers": float(b.self_spends.get(cls, 0)),
            # each action emits one transaction, so this is the class's loop-transaction rate
            "loop_rate": b.self_spends.get(cls, 0) / float(quota[members].sum()),
        }
    return SynthResult(ledger, LabelBook(entries), truth, owner, stats)


# -- class behaviours -----------------------------------------------------------

def _user_pays(b: _Builder, user: Wallet, to: str, amount: int) -> None:
    b.spend(user, [(to, amount)], b.fee(10_000), max_inputs=2)


def _pick_user(b: _Builder, users: list[Wallet], pool: list[int] | None = None) -> int:
    if pool:
        return pool[int(b.rng.integers(len(pool)))]
    return int(b.rng.integers(len(users)))


def _payout(b: _Builder, w: Wallet, p: ClassProfile, users: list[Wallet], amounts: list[int], payees: list[int]) -> None:
    payments = [(b.receive_address(users[u], 0.0), a) for u, a in zip(payees, amounts)]
    b.spend(w, payments, b.fee(p.fee_sat), p.max_inputs)


def _fan(b: _Builder, p: ClassProfile) -> int:
    lo, hi = p.fan_out
    return int(b.rng.integers(lo, hi + 1))


def _exchange(b: _Builder, w: Wallet, p: ClassProfile, users: list[Wallet]) -> None:
    if b.rng.random() < p.inbound_share:
        u = _pick_user(b, users)
        _user_pays(b, users[u], b.receive_address(w, p.address_reuse_rate), b.amount(p.amount_btc, p.amount_sigma))
        return
    n = _fan(b, p)
    payees = [_pick_user(b, users) for _ in range(n)]
    _payout(b, w, p, users, [b.amount(p.amount_btc, p.amount_sigma) for _ in range(n)], payees)


def _gambling(b: _Builder, w: Wallet, p: ClassProfile, users: list[Wallet]) -> None:
    if b.rng.random() < p.inbound_share or not w.recent:
        u = _pick_user(b, users)
        _user_pays(b, users[u], b.receive_address(w, p.address_reuse_rate), b.amount(p.amount_btc, p.amount_sigma))
        w.recent.append(u)
        del w.recent[:-20]
        return
    u = w.recent[int(b.rng.integers(len(w.recent)))]
    _payout(b, w, p, users, [b.amount(1.8 * p.amount_btc, p.amount_sigma)], [u])


def _marketplace(b: _Builder, w: Wallet, p: ClassProfile, users: list[Wallet]) -> None:
    if b.rng.random() < p.inbound_share:
        u = _pick_user(b, users)
        _user_pays(b, users[u], b.receive_address(w, p.address_reuse_rate), b.amount(p.amount_btc, p.amount_sigma))
        return
    n = _fan(b, p)
    payees = [_pick_user(b, users, w.partners) for _ in range(n)]
    _payout(b, w, p, users, [b.amount(6 * p.amount_btc, p.amount_sigma) for _ in range(n)], payees)


def _mining_pool(b: _Builder, w: Wallet, p: ClassProfile, users: list[Wallet]) -> None:
    if b.rng.random() < p.inbound_share:
        b.emit([], [(b.receive_address(w, p.address_reuse_rate), COINBASE_REWARD)])
        return
    n = _fan(b, p)
    payees = [_pick_user(b, users, w.partners) for _ in range(n)]
    _payout(b, w, p, users, [b.amount(p.amount_btc, p.amount_sigma) for _ in range(n)], payees)


def _mixer(b: _Builder, w: Wallet, p: ClassProfile, users: list[Wallet]) -> None:
    denom = MIXER_DENOMINATIONS_BTC[int(b.rng.integers(len(MIXER_DENOMINATIONS_BTC)))]
    unit = int(denom * SATOSHI_PER_BTC)
    if b.rng.random() < p.inbound_share:
        u = _pick_user(b, users)
        _user_pays(b, users[u], b.receive_address(w, p.address_reuse_rate), unit + p.fee_sat)
        return
    n = _fan(b, p)
    payees = [_pick_user(b, users) for _ in range(n)]
    _payout(b, w, p, users, [unit] * n, payees)


def _service(b: _Builder, w: Wallet, p: ClassProfile, users: list[Wallet]) -> None:
    if b.rng.random() < p.inbound_share:
        u = _pick_user(b, users)
        _user_pays(b, users[u], b.receive_address(w, p.address_reuse_rate), b.amount(p.amount_btc, p.amount_sigma))
        return
    n = _fan(b, p)
    payees = [_pick_user(b, users, w.partners) for _ in range(n)]
    _payout(b, w, p, users, [b.amount(p.amount_btc, p.amount_sigma) for _ in range(n)], payees)
