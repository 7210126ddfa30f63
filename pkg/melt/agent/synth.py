"""
Power and temperature synthesis for the simulated device.

Power is piecewise per phase (idle, load, prefill, decode) and decays back to idle with a
first-order tail after each active phase. Every power sample is the exact mean of that curve over
the sample's cell [t - dt/2, t + dt/2), computed from a closed-form cumulative energy, so the
synthesized trace integrates to the phase sums the events imply.
"""

from __future__ import annotations

import dataclasses
import typing

import numpy as np

import melt.const.device as device_const
import melt.const.event as event_const
import melt.const.time as time_const
import melt.schema.event as event_schema
import melt.schema.trace as trace_schema

# RNG stream ids, combined with (seed, run_index) so each stream is independent and reproducible.
STREAM_GEN_LENGTH = 0
STREAM_POWER_NOISE = 1
STREAM_TEMP_NOISE = 2
STREAM_CLOCK = 3

SKIN_GAIN = 0.5
SKIN_TAU_FACTOR = 3.0


def rng_for(seed: int, run_index: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, run_index, stream])


@dataclasses.dataclass(frozen=True)
class ActiveSpan:
    start_s: float
    end_s: float
    power_mw: float


@dataclasses.dataclass(frozen=True)
class PowerTimeline:
    """
    Segment k covers [starts[k], starts[k+1]) with P(t) = level[k] + tail[k] * exp(-(t - starts[k]) / tau).
    The first segment is idle and reaches back to `starts[0]`.
    """

    starts: np.ndarray
    level: np.ndarray
    tail: np.ndarray
    tau_s: float
    energy_at_start: np.ndarray  # mW*s accumulated from starts[0]

    @classmethod
    def build(cls, spans: list[ActiveSpan], idle_mw: float, tau_s: float, origin_s: float) -> PowerTimeline:
        starts, level, tail = [origin_s], [idle_mw], [0.0]
        for span in sorted(spans, key=lambda s: s.start_s):
            if span.end_s <= span.start_s:
                continue
            starts.append(span.start_s)
            level.append(span.power_mw)
            tail.append(0.0)
            starts.append(span.end_s)
            level.append(idle_mw)
            tail.append(span.power_mw - idle_mw if tau_s > 0 else 0.0)

        starts_arr, level_arr, tail_arr = np.array(starts), np.array(level), np.array(tail)
        # Back-to-back spans leave zero-length idle segments behind, which integrate to nothing.
        widths = np.diff(starts_arr)
        energy = np.concatenate(([0.0], np.cumsum(cls._integral(level_arr[:-1], tail_arr[:-1], widths, tau_s))))
        return cls(starts=starts_arr, level=level_arr, tail=tail_arr, tau_s=tau_s, energy_at_start=energy)

    @staticmethod
    def _integral(level: np.ndarray, tail: np.ndarray, width: np.ndarray, tau_s: float) -> np.ndarray:
        if tau_s <= 0:
            return level * width
        return level * width - tail * tau_s * np.expm1(-width / tau_s)

    def _segment(self, t_s: np.ndarray) -> np.ndarray:
        return np.clip(np.searchsorted(self.starts, t_s, side="right") - 1, 0, len(self.starts) - 1)

    def energy(self, t_s: np.ndarray) -> np.ndarray:
        """Cumulative energy in mW*s from the timeline origin up to each t."""
        seg = self._segment(t_s)
        within = t_s - self.starts[seg]
        return self.energy_at_start[seg] + self._integral(self.level[seg], self.tail[seg], within, self.tau_s)

    def power(self, t_s: np.ndarray) -> np.ndarray:
        seg = self._segment(t_s)
        if self.tau_s <= 0:
            return self.level[seg].copy()
        return self.level[seg] + self.tail[seg] * np.exp(-(t_s - self.starts[seg]) / self.tau_s)

    def cell_mean(self, t_s: np.ndarray, width_s: float) -> np.ndarray:
        return (self.energy(t_s + width_s / 2) - self.energy(t_s - width_s / 2)) / width_s


def active_spans(
    profile: event_schema.SimProfile, events: typing.Sequence[event_schema.Event], to_s: typing.Callable[[int], float]
) -> list[ActiveSpan]:
    """Load, prefill and decode spans of an event trace, each with the power level it runs at."""
    spans: list[ActiveSpan] = []
    open_load: float | None = None
    prefill: dict[int, tuple[float, float]] = {}  # prompt_index -> (begin, power_scale)
    decode: dict[int, list[float]] = {}  # prompt_index -> [prefill end, last decode token, power_scale]

    for event in events:
        ts = to_s(event.ts_ns)
        prompt_index = event.attrs.get("prompt_index", -1)
        match event.kind, event.phase:
            case event_const.EventKind.MODEL_LOAD, event_const.EventPhase.BEGIN:
                open_load = ts
            case event_const.EventKind.MODEL_LOAD, event_const.EventPhase.END if open_load is not None:
                spans.append(ActiveSpan(open_load, ts, profile.load_power_mw))
                open_load = None
            case event_const.EventKind.PREFILL, event_const.EventPhase.BEGIN:
                prefill[prompt_index] = (ts, event.attrs.get("power_scale", 1.0))
            case event_const.EventKind.PREFILL, event_const.EventPhase.END if prompt_index in prefill:
                begin, scale = prefill.pop(prompt_index)
                spans.append(ActiveSpan(begin, ts, profile.prefill_power_mw * scale))
                decode[prompt_index] = [ts, ts, scale]
            case event_const.EventKind.DECODE_TOKEN, _ if prompt_index in decode:
                decode[prompt_index][1] = ts

    spans.extend(ActiveSpan(begin, end, profile.decode_power_mw * scale) for begin, end, scale in decode.values())
    return spans


def _timeline_for(
    profile: event_schema.SimProfile,
    events: typing.Sequence[event_schema.Event],
    epoch_ns: int,
    offset_ns: int,
    origin_s: float,
) -> PowerTimeline:
    def to_s(device_ns: int) -> float:
        return (device_ns - offset_ns - epoch_ns) / time_const.NS_PER_S

    spans = active_spans(profile, events, to_s)
    origin = min([origin_s, *(span.start_s for span in spans)]) - 1.0
    return PowerTimeline.build(spans, profile.idle_power_mw, profile.tail_tau_s, origin)


def _window(
    events: typing.Sequence[event_schema.Event], host_start_ns: int | None, host_end_ns: int | None, offset_ns: int
) -> tuple[int, int]:
    if host_start_ns is None:
        host_start_ns = min(event.ts_ns for event in events) - offset_ns
    if host_end_ns is None:
        host_end_ns = max(event.ts_ns for event in events) - offset_ns
    return host_start_ns, host_end_ns


def sim_power_trace(
    profile: event_schema.SimProfile,
    events: typing.Sequence[event_schema.Event],
    *,
    host_start_ns: int | None = None,
    host_end_ns: int | None = None,
    offset_ns: int = 0,
    rate_hz: float | None = None,
    run_index: int = 0,
    rails: bool = False,
    meta: trace_schema.TraceMeta = trace_schema.TraceMeta(),
) -> trace_schema.PowerTrace:
    """
    Sample the device power over the host window [host_start_ns, host_end_ns].
    Events are in device time (host = device - offset); samples are seconds since host_start_ns.
    Without a window the trace spans the events themselves.
    """
    host_start_ns, host_end_ns = _window(events, host_start_ns, host_end_ns, offset_ns)
    rate_hz = rate_hz or profile.sample_rate_hz
    span_s = (host_end_ns - host_start_ns) / time_const.NS_PER_S
    ts_s = np.arange(int(np.floor(span_s * rate_hz + 1e-9)) + 1) / rate_hz

    timeline = _timeline_for(profile, events, host_start_ns, offset_ns, 0.0)
    power_mw = timeline.cell_mean(ts_s, 1.0 / rate_hz)
    if profile.noise_std_mw > 0:
        power_mw = power_mw + rng_for(profile.seed, run_index, STREAM_POWER_NOISE).normal(
            0.0, profile.noise_std_mw, len(ts_s)
        )

    if rails:
        rail_series = {
            rail: trace_schema.RailSeries(ts_s=ts_s, power_mw=power_mw * share)
            for rail, share in profile.rail_shares.items()
        }
        rail_series[device_const.Rail.TOTAL] = trace_schema.RailSeries(ts_s=ts_s, power_mw=power_mw)
        return trace_schema.PowerTrace(
            source=device_const.PowerSource.SYSFS, ts_s=ts_s, rails=rail_series, nominal_rate_hz=rate_hz, meta=meta
        )

    voltage_v = np.full_like(ts_s, profile.voltage_v)
    return trace_schema.PowerTrace(
        source=device_const.PowerSource.SIM,
        ts_s=ts_s,
        current_ma=power_mw / voltage_v,
        voltage_v=voltage_v,
        nominal_rate_hz=rate_hz,
        meta=meta,
    )


def _first_order(
    ambient_c: float, gain_c_per_w: float, tau_s: float, mean_power_mw: np.ndarray, dt: float
) -> np.ndarray:
    """T[k+1] = target[k] + (T[k] - target[k]) * exp(-dt/tau), starting settled at the first cell's target."""
    target = ambient_c + gain_c_per_w * mean_power_mw / 1000.0
    decay = np.exp(-dt / tau_s)
    temp = np.empty_like(target)
    if not len(target):
        return temp
    temp[0] = target[0]
    for k in range(1, len(target)):
        temp[k] = target[k - 1] + (temp[k - 1] - target[k - 1]) * decay
    return temp


def sim_temperature_trace(
    profile: event_schema.SimProfile,
    events: typing.Sequence[event_schema.Event],
    *,
    host_start_ns: int | None = None,
    host_end_ns: int | None = None,
    offset_ns: int = 0,
    run_index: int = 0,
    meta: trace_schema.TraceMeta = trace_schema.TraceMeta(),
) -> trace_schema.TempTrace:
    """Two sensors: the SoC follows power with the profile's gain and time constant, the skin lags behind it."""
    host_start_ns, host_end_ns = _window(events, host_start_ns, host_end_ns, offset_ns)
    rate_hz = profile.temp_sample_rate_hz
    span_s = (host_end_ns - host_start_ns) / time_const.NS_PER_S
    ts_s = np.arange(int(np.floor(span_s * rate_hz + 1e-9)) + 1) / rate_hz
    dt = 1.0 / rate_hz

    timeline = _timeline_for(profile, events, host_start_ns, offset_ns, 0.0)
    # Mean power over [t_k, t_k + dt) drives the step from t_k to t_k+1.
    mean_power_mw = (timeline.energy(ts_s + dt) - timeline.energy(ts_s)) / dt

    sensors = {
        "soc": _first_order(profile.ambient_c, profile.thermal_k_c_per_w, profile.thermal_tau_s, mean_power_mw, dt),
        "skin": _first_order(
            profile.ambient_c,
            profile.thermal_k_c_per_w * SKIN_GAIN,
            profile.thermal_tau_s * SKIN_TAU_FACTOR,
            mean_power_mw,
            dt,
        ),
    }
    if profile.temp_noise_std_c > 0:
        rng = rng_for(profile.seed, run_index, STREAM_TEMP_NOISE)
        sensors = {name: temp + rng.normal(0.0, profile.temp_noise_std_c, len(temp)) for name, temp in sensors.items()}

    return trace_schema.TempTrace(
        sensors={name: trace_schema.TempSeries(ts_s=ts_s, temp_c=temp) for name, temp in sensors.items()},
        source=device_const.PowerSource.SIM,
        meta=meta,
    )
