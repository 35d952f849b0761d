"""Walker constellation geometry and link channel models.

Propagates circular Keplerian orbits over a planning period, computes
per-slot node positions (ECEF), pairwise distances and visibility, and
evaluates achievable link rates for inter-satellite links (free-space)
and satellite-terrestrial links (Rician).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

# Earth model: sphere with equatorial radius; circular orbits only.
MU_EARTH = 398600.4418        # km^3 / s^2
EARTH_RADIUS = 6378.137       # km
EARTH_ROTATION = 7.2921159e-5  # rad / s
LIGHT_SPEED = 299792458.0     # m / s
BOLTZMANN = 1.380649e-23      # J / K


class GeometryError(ValueError):
    """Raised for invalid constellation or propagation inputs."""


@dataclass(frozen=True)
class ConstellationConfig:
    planes: int
    sats_per_plane: int
    altitude_km: float
    inclination_deg: float
    phasing_factor: int = 1
    epoch: str = "2022-04-10T06:00:00Z"
    ground_stations: tuple[tuple[float, float], ...] = ()
    ground_users: tuple[tuple[float, float], ...] = ()
    elevation_mask_deg: float = 10.0
    max_isl_range_km: float = 6000.0
    raan_offset_deg: float = 0.0   # rotates all planes; aligns coverage with sites

    def __post_init__(self):
        if self.planes < 1 or self.sats_per_plane < 1:
            raise GeometryError("constellation must have at least one satellite")
        if self.altitude_km <= 0:
            raise GeometryError("altitude must be positive")
        if not 0.0 <= self.inclination_deg <= 180.0:
            raise GeometryError("inclination must be in [0, 180] degrees")

    @property
    def num_satellites(self) -> int:
        return self.planes * self.sats_per_plane

    def node_names(self) -> list[str]:
        """Satellites first, then stations, then users."""
        sats = [f"S{i}" for i in range(self.num_satellites)]
        stations = [f"G{i}" for i in range(len(self.ground_stations))]
        users = [f"U{i}" for i in range(len(self.ground_users))]
        return sats + stations + users

    @staticmethod
    def from_dict(doc: dict) -> "ConstellationConfig":
        return ConstellationConfig(
            planes=int(doc["planes"]),
            sats_per_plane=int(doc["satsPerPlane"]),
            altitude_km=float(doc["altitudeKm"]),
            inclination_deg=float(doc["inclinationDeg"]),
            phasing_factor=int(doc.get("phasingFactor", 1)),
            epoch=doc.get("epoch", "2022-04-10T06:00:00Z"),
            ground_stations=tuple((float(a), float(b)) for a, b in doc.get("groundStations", [])),
            ground_users=tuple((float(a), float(b)) for a, b in doc.get("groundUsers", [])),
            elevation_mask_deg=float(doc.get("elevationMaskDeg", 10.0)),
            max_isl_range_km=float(doc.get("maxIslRangeKm", 6000.0)),
            raan_offset_deg=float(doc.get("raanOffsetDeg", 0.0)),
        )


@dataclass(frozen=True)
class ChannelParams:
    """Link-budget constants shared by the ISL and STL models."""

    bandwidth_hz: float = 20e6
    carrier_hz: float = 20e9
    thermal_noise_k: float = 354.81
    antenna_gain: float = 3.74       # combined EIRP + receive gain product (with tx_power_w = 1)
    tx_power_w: float = 1.0
    rician_factor: float = 10.0
    path_loss_exp: float = 2.0
    path_loss_exp_nlos: float = 3.0
    noise_power_w: float = 0.0       # 0 -> use k_B * zeta * B
    boltzmann: float = BOLTZMANN
    light_speed: float = LIGHT_SPEED

    def __post_init__(self):
        for name in ("bandwidth_hz", "carrier_hz", "thermal_noise_k", "antenna_gain",
                     "tx_power_w", "path_loss_exp", "path_loss_exp_nlos"):
            if getattr(self, name) <= 0:
                raise GeometryError(f"channel parameter {name} must be positive")
        if self.rician_factor < 0:
            raise GeometryError("Rician factor must be nonnegative")

    @property
    def sigma0_sq(self) -> float:
        if self.noise_power_w > 0:
            return self.noise_power_w
        return self.boltzmann * self.thermal_noise_k * self.bandwidth_hz

    @staticmethod
    def from_dict(doc: dict) -> "ChannelParams":
        defaults = ChannelParams()
        return ChannelParams(
            bandwidth_hz=float(doc.get("bandwidthHz", defaults.bandwidth_hz)),
            carrier_hz=float(doc.get("carrierHz", defaults.carrier_hz)),
            thermal_noise_k=float(doc.get("thermalNoiseK", defaults.thermal_noise_k)),
            antenna_gain=float(doc.get("antennaGain", defaults.antenna_gain)),
            tx_power_w=float(doc.get("txPowerW", defaults.tx_power_w)),
            rician_factor=float(doc.get("ricianFactor", defaults.rician_factor)),
            path_loss_exp=float(doc.get("pathLossExp", defaults.path_loss_exp)),
            path_loss_exp_nlos=float(doc.get("pathLossExpNlos", defaults.path_loss_exp_nlos)),
            noise_power_w=float(doc.get("noisePowerW", 0.0)),
        )


@dataclass
class GeometrySnapshot:
    """Start-of-slot geometry: positions (ECEF km), distances, visibility."""

    slot: int
    names: list[str]
    classes: list[str]                # "satellite" | "groundStation" | "groundUser"
    positions: np.ndarray             # (N, 3) km
    distance: np.ndarray = field(init=False)   # (N, N) km
    visible: np.ndarray = field(init=False)    # (N, N) bool

    def __post_init__(self):
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        self.distance = np.linalg.norm(diff, axis=2)
        self.visible = np.zeros_like(self.distance, dtype=bool)

    def index(self, name: str) -> int:
        return self.names.index(name)


def orbital_period(altitude_km: float) -> float:
    """Circular orbit period in seconds."""
    if altitude_km <= 0:
        raise GeometryError("altitude must be positive")
    a = EARTH_RADIUS + altitude_km
    return 2.0 * math.pi * math.sqrt(a ** 3 / MU_EARTH)


def _satellite_positions_ecef(config: ConstellationConfig, t_sec: float) -> np.ndarray:
    """ECEF positions of all satellites at epoch + t_sec."""
    a = EARTH_RADIUS + config.altitude_km
    inc = math.radians(config.inclination_deg)
    mean_motion = math.sqrt(MU_EARTH / a ** 3)
    n_total = config.num_satellites
    out = np.empty((n_total, 3))
    idx = 0
    for p in range(config.planes):
        raan = math.radians(config.raan_offset_deg) + 2.0 * math.pi * p / config.planes
        for s in range(config.sats_per_plane):
            # Walker phasing: inter-plane slot offset of F pattern units.
            u0 = 2.0 * math.pi * (s / config.sats_per_plane
                                  + config.phasing_factor * p / (config.planes * config.sats_per_plane))
            u = u0 + mean_motion * t_sec
            x_orb = a * math.cos(u)
            y_orb = a * math.sin(u)
            # rotate by inclination about x, then RAAN about z (ECI)
            x = x_orb * math.cos(raan) - y_orb * math.cos(inc) * math.sin(raan)
            y = x_orb * math.sin(raan) + y_orb * math.cos(inc) * math.cos(raan)
            z = y_orb * math.sin(inc)
            # ECI -> ECEF (frames aligned at epoch)
            theta = EARTH_ROTATION * t_sec
            ct, st = math.cos(theta), math.sin(theta)
            out[idx] = (ct * x + st * y, -st * x + ct * y, z)
            idx += 1
    return out


def _ground_positions_ecef(latlon: tuple[tuple[float, float], ...]) -> np.ndarray:
    out = np.empty((len(latlon), 3))
    for i, (lat, lon) in enumerate(latlon):
        la, lo = math.radians(lat), math.radians(lon)
        out[i] = (EARTH_RADIUS * math.cos(la) * math.cos(lo),
                  EARTH_RADIUS * math.cos(la) * math.sin(lo),
                  EARTH_RADIUS * math.sin(la))
    return out


def propagate(config: ConstellationConfig, slots: int, slot_length_s: float) -> list[GeometrySnapshot]:
    """One snapshot per slot, taken at each slot's start.

    Satellites follow circular Keplerian orbits; ground nodes are fixed
    in ECEF (they co-rotate with Earth). Visibility flags are filled in.
    """
    if slots < 1:
        raise GeometryError("slots must be >= 1")
    if slot_length_s <= 0:
        raise GeometryError("slot length must be positive")
    names = config.node_names()
    classes = (["satellite"] * config.num_satellites
               + ["groundStation"] * len(config.ground_stations)
               + ["groundUser"] * len(config.ground_users))
    ground = np.vstack([_ground_positions_ecef(config.ground_stations).reshape(-1, 3),
                        _ground_positions_ecef(config.ground_users).reshape(-1, 3)]) \
        if (config.ground_stations or config.ground_users) else np.zeros((0, 3))
    snaps = []
    for t in range(1, slots + 1):
        t_sec = (t - 1) * slot_length_s
        sat = _satellite_positions_ecef(config, t_sec)
        pos = np.vstack([sat, ground]) if len(ground) else sat
        snap = GeometrySnapshot(slot=t, names=names, classes=classes, positions=pos)
        visibility(snap, config)
        snaps.append(snap)
    return snaps


def _segment_clears_earth(p1: np.ndarray, p2: np.ndarray) -> bool:
    """True if the p1-p2 segment does not intersect the Earth sphere."""
    d = p2 - p1
    dd = float(d @ d)
    if dd == 0.0:
        return True
    s = -float(p1 @ d) / dd
    s = min(1.0, max(0.0, s))
    closest = p1 + s * d
    return float(np.linalg.norm(closest)) >= EARTH_RADIUS - 1e-9


def elevation_deg(ground: np.ndarray, sat: np.ndarray) -> float:
    """Elevation of `sat` as seen from ground point `ground` (both ECEF km)."""
    rel = sat - ground
    up = ground / np.linalg.norm(ground)
    return math.degrees(math.asin(float(rel @ up) / float(np.linalg.norm(rel))))


def visibility(snapshot: GeometrySnapshot, config: ConstellationConfig) -> GeometrySnapshot:
    """Fill snapshot.visible in place and return the snapshot.

    ISL: line of sight clears the Earth sphere and range <= maxIslRange.
    STL: elevation >= mask (closed threshold).
    Ground station pairs: always visible (fiber).
    """
    n = len(snapshot.names)
    cls = snapshot.classes
    vis = snapshot.visible
    for i in range(n):
        for j in range(i + 1, n):
            ci, cj = cls[i], cls[j]
            ok = False
            if ci == "satellite" and cj == "satellite":
                ok = (snapshot.distance[i, j] <= config.max_isl_range_km
                      and _segment_clears_earth(snapshot.positions[i], snapshot.positions[j]))
            elif ci == "satellite" or cj == "satellite":
                g, s = (j, i) if ci == "satellite" else (i, j)
                if cls[g] in ("groundStation", "groundUser"):
                    el = elevation_deg(snapshot.positions[g], snapshot.positions[s])
                    ok = el >= config.elevation_mask_deg
            elif ci == "groundStation" and cj == "groundStation":
                ok = True
            vis[i, j] = vis[j, i] = ok
    return snapshot


def isl_rate(d_km: float, p: ChannelParams) -> float:
    """Free-space inter-satellite link rate in bit/s.

    Gain g = c * sqrt(G) / (4 pi d f sqrt(kB zeta B)); rate = B log2(1 + p |g|^2).
    """
    if d_km <= 0:
        raise GeometryError("distance must be positive")
    d_m = d_km * 1e3
    g = (p.light_speed * math.sqrt(p.antenna_gain)
         / (4.0 * math.pi * d_m * p.carrier_hz
            * math.sqrt(p.boltzmann * p.thermal_noise_k * p.bandwidth_hz)))
    return p.bandwidth_hz * math.log2(1.0 + p.tx_power_w * g * g)


def stl_gain_los_power(d_km: float, p: ChannelParams) -> float:
    """|g|^2 of the LoS-only Rician gain: (eta/(1+eta)) * d^-rho."""
    if d_km <= 0:
        raise GeometryError("distance must be positive")
    d_m = d_km * 1e3
    eta = p.rician_factor
    return (eta / (1.0 + eta)) * d_m ** (-p.path_loss_exp)


def stl_rate(d_km: float, p: ChannelParams, direction: str = "up",
             fading: str = "losOnly", rng: np.random.Generator | None = None) -> float:
    """Satellite-terrestrial link rate in bit/s (Rician channel).

    `fading="losOnly"` zeroes the scattered component for determinism;
    `fading="sample"` draws the NLoS term from a standard complex normal
    using `rng`. Uplink and downlink share the symmetric default budget;
    `direction` selects which end's power applies.
    """
    if d_km <= 0:
        raise GeometryError("distance must be positive")
    if direction not in ("up", "down"):
        raise GeometryError("direction must be 'up' or 'down'")
    d_m = d_km * 1e3
    eta = p.rician_factor
    phase = -2.0 * math.pi * p.carrier_hz * d_m / p.light_speed
    g_los = math.sqrt(d_m ** (-p.path_loss_exp)) * complex(math.cos(phase), math.sin(phase))
    g = math.sqrt(eta / (1.0 + eta)) * g_los
    if fading == "sample":
        if rng is None:
            rng = np.random.default_rng(0)
        nlos = complex(rng.standard_normal(), rng.standard_normal()) / math.sqrt(2.0)
        g += math.sqrt(d_m ** (-p.path_loss_exp_nlos) / (1.0 + eta)) * nlos
    elif fading != "losOnly":
        raise GeometryError("fading must be 'sample' or 'losOnly'")
    snr = p.tx_power_w * p.antenna_gain * abs(g) ** 2 / p.sigma0_sq
    return p.bandwidth_hz * math.log2(1.0 + snr)


def export_geometry_json(snapshots: list[GeometrySnapshot]) -> str:
    """Geometry export: nodes plus per-slot positions, distances, visibility."""
    if not snapshots:
        raise GeometryError("no snapshots to export")
    doc = {
        "version": 1,
        "nodes": [{"name": n, "class": c}
                  for n, c in zip(snapshots[0].names, snapshots[0].classes)],
        "slots": [
            {
                "slot": s.slot,
                "positionsKm": np.round(s.positions, 9).tolist(),
                "distanceKm": np.round(s.distance, 9).tolist(),
                "visible": s.visible.astype(int).tolist(),
            }
            for s in snapshots
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True)
