//! Seeded synthetic smart-meter data: household base loads with a morning
//! and an evening peak, plus rectangular EV charging pulses for EV consumers.
//!
//! Each consumer draws from its own RNG streams derived from the master
//! seed, so generation order (serial or parallel) never changes the output.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDateTime;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::nn::derive_seed;
use crate::pipeline::{parse_timestamp, ConsumerSeries, Label, KWH_PER_KW_SLOT, SLOTS_PER_DAY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaseProfile {
    pub morning_peak_kw: f64,
    pub evening_peak_kw: f64,
    pub overnight_floor_kw: f64,
    pub noise_std_kw: f64,
    /// Household size multiplier is drawn uniformly from this range.
    pub scale_range: (f64, f64),
    /// Expected short high-power appliance spikes per day.
    pub spikes_per_day: f64,
    pub spike_kw: f64,
}

impl Default for BaseProfile {
    fn default() -> Self {
        Self {
            morning_peak_kw: 1.2,
            evening_peak_kw: 2.0,
            overnight_floor_kw: 0.3,
            noise_std_kw: 0.15,
            scale_range: (0.7, 1.3),
            spikes_per_day: 0.8,
            spike_kw: 2.4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemandClass {
    Low,
    High,
    /// Each EV consumer is low or high with equal probability.
    Mixed,
}

impl std::str::FromStr for DemandClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low" => Ok(Self::Low),
            "high" => Ok(Self::High),
            "mixed" => Ok(Self::Mixed),
            _ => Err(Error::Config(format!(
                "unknown demand class '{s}' (low, high, mixed)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvProfile {
    pub demand_class: DemandClass,
    pub low_kw: f64,
    pub high_kw: f64,
    /// Relative amplitude jitter per event, uniform in `±jitter`.
    pub amplitude_jitter: f64,
    pub charge_probability: f64,
    pub duration_hours: (f64, f64),
    /// Share of events starting between 22:00 and 06:00.
    pub offpeak_fraction: f64,
}

impl Default for EvProfile {
    fn default() -> Self {
        Self {
            demand_class: DemandClass::Mixed,
            low_kw: 1.8,
            high_kw: 7.2,
            amplitude_jitter: 0.1,
            charge_probability: 0.4,
            duration_hours: (2.0, 5.0),
            offpeak_fraction: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_non_ev: usize,
    pub n_ev: usize,
    pub days: usize,
    pub start: String,
    pub base_profile: BaseProfile,
    pub ev_profile: EvProfile,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self::full()
    }
}

impl SynthConfig {
    /// Full-size population: 1106 non-EV and 139
    /// EV consumers over 92 days.
    pub fn full() -> Self {
        Self {
            n_non_ev: 1106,
            n_ev: 139,
            days: 92,
            start: "2021-03-01T00:00:00".into(),
            base_profile: BaseProfile::default(),
            ev_profile: EvProfile::default(),
            seed: 42,
        }
    }

    /// 260 non-EV (160 train, 40 validation, 60 test) and 40 EV consumers over 28 days.
    pub fn small() -> Self {
        Self {
            n_non_ev: 260,
            n_ev: 40,
            days: 28,
            ..Self::full()
        }
    }

    pub fn tiny() -> Self {
        Self {
            n_non_ev: 80,
            n_ev: 10,
            days: 21,
            ..Self::full()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "full" | "default" => Ok(Self::full()),
            "small" => Ok(Self::small()),
            "tiny" => Ok(Self::tiny()),
            _ => Err(Error::Config(format!(
                "unknown preset '{name}' (full, small, tiny)"
            ))),
        }
    }

    pub fn consumer_count(&self) -> usize {
        self.n_non_ev + self.n_ev
    }

    pub fn slots(&self) -> usize {
        self.days * SLOTS_PER_DAY
    }

    fn start_time(&self) -> Result<NaiveDateTime> {
        parse_timestamp(&self.start)
            .ok_or_else(|| Error::Config(format!("bad start timestamp '{}'", self.start)))
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.consumer_count() > 0,
            Config,
            "no consumers to generate"
        );
        ensure!(self.days > 0, Config, "simulation needs at least one day");
        self.start_time()?;
        let b = &self.base_profile;
        let powers = [
            b.morning_peak_kw,
            b.evening_peak_kw,
            b.overnight_floor_kw,
            b.noise_std_kw,
            b.spike_kw,
            b.spikes_per_day,
            self.ev_profile.low_kw,
            self.ev_profile.high_kw,
        ];
        ensure!(
            powers.iter().all(|p| p.is_finite() && *p >= 0.0),
            Config,
            "powers and rates must be finite and non-negative"
        );
        ensure!(
            b.scale_range.0 > 0.0 && b.scale_range.0 <= b.scale_range.1,
            Config,
            "household scale range must be positive and ordered"
        );
        let ev = &self.ev_profile;
        for (name, p) in [
            ("charge_probability", ev.charge_probability),
            ("offpeak_fraction", ev.offpeak_fraction),
            ("amplitude_jitter", ev.amplitude_jitter),
        ] {
            ensure!(
                (0.0..=1.0).contains(&p),
                Config,
                "{name} must lie in [0, 1], got {p}"
            );
        }
        let (lo, hi) = ev.duration_hours;
        ensure!(
            lo > 0.0 && lo <= hi && hi <= 24.0,
            Config,
            "duration range must lie within (0, 24] hours, got ({lo}, {hi})"
        );
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargeEvent {
    pub day: usize,
    /// Slot within `day` at which charging starts.
    pub start_slot: usize,
    pub duration_slots: usize,
    pub amplitude_kw: f64,
}

impl ChargeEvent {
    pub fn absolute_start(&self) -> usize {
        self.day * SLOTS_PER_DAY + self.start_slot
    }

    pub fn energy_kwh(&self) -> f64 {
        self.amplitude_kw * KWH_PER_KW_SLOT * self.duration_slots as f64
    }
}

/// Ground-truth charging events keyed by consumer id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InjectionLog {
    pub events: BTreeMap<String, Vec<ChargeEvent>>,
}

impl InjectionLog {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = std::io::BufWriter::new(out);
        let io = |e: std::io::Error| Error::io("<injection log>", e);
        writeln!(w, "consumer_id,day,start_slot,duration_slots,amplitude_kw").map_err(io)?;
        for (id, events) in &self.events {
            for e in events {
                writeln!(
                    w,
                    "{id},{},{},{},{}",
                    e.day, e.start_slot, e.duration_slots, e.amplitude_kw
                )
                .map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }
}

/// Adds `amplitude_kw` (as kWh per 30-minute slot) over
/// `start..start + duration`.
pub fn inject_event(
    readings: &[f64],
    start: usize,
    duration: usize,
    amplitude_kw: f64,
) -> Result<Vec<f64>> {
    ensure!(
        start
            .checked_add(duration)
            .is_some_and(|end| end <= readings.len()),
        Bounds,
        "event [{start}, {start}+{duration}) does not fit in {} readings",
        readings.len()
    );
    let mut out = readings.to_vec();
    for v in &mut out[start..start + duration] {
        *v += amplitude_kw * KWH_PER_KW_SLOT;
    }
    Ok(out)
}

fn bump(hour: f64, centre: f64, width: f64) -> f64 {
    // Distance on the 24 h circle.
    let d = (hour - centre).abs();
    let d = d.min(24.0 - d);
    (-0.5 * (d / width).powi(2)).exp()
}

/// Base (non-EV) load of consumer `index`, in kWh per slot.
pub fn base_profile(config: &SynthConfig, index: usize) -> Vec<f64> {
    let b = &config.base_profile;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 2 * index as u64));
    let scale = rng.gen_range(b.scale_range.0..=b.scale_range.1);
    let morning_at = rng.gen_range(6.5..8.5);
    let evening_at = rng.gen_range(17.5..20.5);
    let floor = b.overnight_floor_kw * rng.gen_range(0.7..1.3);
    let noise = Normal::new(0.0, b.noise_std_kw.max(f64::MIN_POSITIVE)).expect("finite std");
    let spike_p = (b.spikes_per_day / SLOTS_PER_DAY as f64).min(1.0);

    let mut out = Vec::with_capacity(config.slots());
    for day in 0..config.days {
        // Weekends: later, flatter mornings and more daytime use.
        let weekend = day % 7 >= 5;
        let day_level = rng.gen_range(0.85..1.15);
        let (m_shift, daytime) = if weekend { (1.5, 0.35) } else { (0.0, 0.1) };
        for slot in 0..SLOTS_PER_DAY {
            let hour = slot as f64 / 2.0;
            let mut kw = floor
                + b.morning_peak_kw * bump(hour, morning_at + m_shift, 1.0)
                + b.evening_peak_kw * bump(hour, evening_at, 1.6)
                + daytime * bump(hour, 13.0, 3.0);
            kw *= scale * day_level;
            if b.noise_std_kw > 0.0 {
                kw += noise.sample(&mut rng);
            }
            if rng.gen::<f64>() < spike_p {
                kw += b.spike_kw * rng.gen_range(0.6..1.2);
            }
            out.push(kw.max(0.0) * KWH_PER_KW_SLOT);
        }
    }
    out
}

fn draw_schedule(
    config: &SynthConfig,
    rng: &mut ChaCha8Rng,
    amplitude_kw: f64,
) -> Vec<ChargeEvent> {
    let ev = &config.ev_profile;
    let total = config.slots();
    let mut events = Vec::new();
    for day in 0..config.days {
        if rng.gen::<f64>() >= ev.charge_probability {
            continue;
        }
        let hours = rng.gen_range(ev.duration_hours.0..=ev.duration_hours.1);
        let mut duration = ((hours * 2.0).round() as usize).max(1);
        // 22:00-06:00 is slots 44..48 and 0..12.
        let start_slot = if rng.gen::<f64>() < ev.offpeak_fraction {
            (44 + rng.gen_range(0..20)) % SLOTS_PER_DAY
        } else {
            rng.gen_range(12..44)
        };
        let abs = day * SLOTS_PER_DAY + start_slot;
        duration = duration.min(total - abs);
        let jitter = if ev.amplitude_jitter > 0.0 {
            rng.gen_range(-ev.amplitude_jitter..=ev.amplitude_jitter)
        } else {
            0.0
        };
        events.push(ChargeEvent {
            day,
            start_slot,
            duration_slots: duration,
            amplitude_kw: amplitude_kw * (1.0 + jitter),
        });
    }
    events
}

struct Generated {
    readings: Vec<f64>,
    events: Option<Vec<ChargeEvent>>,
}

fn generate_consumer(config: &SynthConfig, index: usize) -> Result<Generated> {
    let mut readings = base_profile(config, index);
    if index < config.n_non_ev {
        return Ok(Generated {
            readings,
            events: None,
        });
    }
    let ev = &config.ev_profile;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 2 * index as u64 + 1));
    let class = match ev.demand_class {
        DemandClass::Mixed if rng.gen::<bool>() => DemandClass::High,
        DemandClass::Mixed => DemandClass::Low,
        c => c,
    };
    let amplitude = if class == DemandClass::High {
        ev.high_kw
    } else {
        ev.low_kw
    };
    let mut events = Vec::new();
    if ev.charge_probability > 0.0 && amplitude > 0.0 {
        // An EV consumer charges at least once over the horizon.
        while events.is_empty() {
            events = draw_schedule(config, &mut rng, amplitude);
        }
    }
    for e in &events {
        readings = inject_event(
            &readings,
            e.absolute_start(),
            e.duration_slots,
            e.amplitude_kw,
        )?;
    }
    Ok(Generated {
        readings,
        events: Some(events),
    })
}

/// Consumer id of each generation index (non-EV indices first).
pub fn consumer_ids(config: &SynthConfig) -> Vec<String> {
    let mut perm: Vec<usize> = (0..config.consumer_count()).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(
        config.seed,
        u64::MAX,
    )));
    perm.into_iter().map(|p| format!("C{p:05}")).collect()
}

/// Generates all consumers, sorted by id, and the log of injected events.
/// Consumer ids are assigned through a seeded permutation so that they carry
/// no label information.
pub fn generate(config: &SynthConfig) -> Result<(Vec<ConsumerSeries>, InjectionLog)> {
    config.validate()?;
    let start = config.start_time()?;
    let n = config.consumer_count();
    let ids = consumer_ids(config);

    let generated: Vec<Generated> = (0..n)
        .into_par_iter()
        .map(|i| generate_consumer(config, i))
        .collect::<Result<_>>()?;

    let mut series = Vec::with_capacity(n);
    let mut log = InjectionLog::default();
    for (i, g) in generated.into_iter().enumerate() {
        let id = ids[i].clone();
        let label = if g.events.is_some() {
            Label::Ev
        } else {
            Label::NonEv
        };
        if let Some(events) = g.events {
            if !events.is_empty() {
                log.events.insert(id.clone(), events);
            }
        }
        series.push(ConsumerSeries::new(id, start, g.readings, label)?);
    }
    series.sort_by(|a, b| a.consumer_id.cmp(&b.consumer_id));
    Ok((series, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn injection_arithmetic() {
        let out = inject_event(&[0.0; 8], 2, 4, 7.2).unwrap();
        assert_eq!(out, vec![0.0, 0.0, 3.6, 3.6, 3.6, 3.6, 0.0, 0.0]);
        let x = [0.1, 0.2, 0.3];
        assert_eq!(inject_event(&x, 0, 3, 0.0).unwrap(), x.to_vec());
        assert!(matches!(inject_event(&x, 2, 2, 1.0), Err(Error::Bounds(_))));
    }

    #[test]
    fn injections_commute() {
        let x = [0.5; 10];
        let a = inject_event(&inject_event(&x, 0, 3, 1.8).unwrap(), 5, 2, 7.2).unwrap();
        let b = inject_event(&inject_event(&x, 5, 2, 7.2).unwrap(), 0, 3, 1.8).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_consumers_is_a_config_error() {
        let cfg = SynthConfig {
            n_non_ev: 0,
            n_ev: 0,
            ..SynthConfig::tiny()
        };
        assert!(matches!(generate(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn ev_totals_are_base_plus_events() {
        let cfg = SynthConfig::tiny();
        let (series, log) = generate(&cfg).unwrap();
        let ev_count = series.iter().filter(|s| s.label == Label::Ev).count();
        assert_eq!(ev_count, cfg.n_ev);
        assert_eq!(log.events.len(), cfg.n_ev);
        let ids = consumer_ids(&cfg);
        for index in cfg.n_non_ev..cfg.consumer_count() {
            let s = series.iter().find(|s| s.consumer_id == ids[index]).unwrap();
            assert_eq!(s.label, Label::Ev);
            let events = &log.events[&s.consumer_id];
            assert!(!events.is_empty());
            let added: f64 = events.iter().map(ChargeEvent::energy_kwh).sum();
            let base_total: f64 = base_profile(&cfg, index).iter().sum();
            assert!((s.total_kwh() - (base_total + added)).abs() < 1e-9);
        }
    }
}
