//! Reproducible Monte Carlo estimation of frame and bit erasure rates.
//!
//! Every trial draws from three ChaCha8 streams keyed by the master seed and
//! selected by `(trial, role)`, so a trial's randomness does not depend on
//! which thread runs it or in what order. Counts are integers and are merged
//! by addition, which keeps the outcome bit-identical under any parallelism.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{Beta, ContinuousCDF};

use crate::analysis::fer_proxy;
use crate::codec::{encode_in_place, transmit_bec_into, BernoulliFaults, Llr, ScDecoder};
use crate::construction::CodeConstruction;
use crate::error::{Error, Result};
use crate::transfer::{Correlation, FaultSpec, Probability};

/// Hard cap on trials per run.
pub const MAX_TRIALS: u64 = 10_000_000;

/// Cap on decoder node updates per run (trials times nodes per frame).
pub const MAX_NODE_UPDATES: u128 = 1 << 42;

const Z_95: f64 = 1.959_963_984_540_054;

/// Below this many erasures (or non-erasures) intervals are Clopper-Pearson.
const EXACT_CI_THRESHOLD: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamRole {
    Source = 0,
    Channel = 1,
    Faults = 2,
}

/// The random stream for one role of one trial.
pub fn substream(master_seed: u64, trial: u64, role: StreamRole) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial.wrapping_mul(3).wrapping_add(role as u64));
    rng
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub code: CodeConstruction,
    pub channel_erasure: Probability,
    /// Fault model of the simulated decoder. Its `correlation` selects shared
    /// or independent-tree fault randomness.
    pub fault: FaultSpec,
    pub trials: u64,
    pub master_seed: u64,
    /// Feed the true bits forward and record per-index erasure counts.
    pub genie: bool,
}

impl SimConfig {
    pub fn new(code: CodeConstruction, channel_erasure: Probability, fault: FaultSpec) -> Self {
        SimConfig {
            code,
            channel_erasure,
            fault,
            trials: 10_000,
            master_seed: 0,
            genie: false,
        }
    }

    pub fn trials(mut self, trials: u64) -> Self {
        self.trials = trials;
        self
    }

    pub fn seed(mut self, master_seed: u64) -> Self {
        self.master_seed = master_seed;
        self
    }

    pub fn genie(mut self, genie: bool) -> Self {
        self.genie = genie;
        self
    }

    /// Node updates one frame costs the decoder.
    pub fn nodes_per_frame(&self) -> u128 {
        let len = self.code.len() as u128;
        match self.fault.correlation {
            Correlation::Shared => len * self.code.n() as u128,
            Correlation::IndependentTree => len * (len - 1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("at least one trial is required"));
        }
        if self.trials > MAX_TRIALS {
            return Err(Error::Resource(format!(
                "{} trials exceed the cap of {MAX_TRIALS}",
                self.trials
            )));
        }
        let work = self.trials as u128 * self.nodes_per_frame();
        if work > MAX_NODE_UPDATES {
            return Err(Error::Resource(format!(
                "{work} decoder node updates exceed the cap of {MAX_NODE_UPDATES}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub frames: u64,
    pub frame_erasures: u64,
    pub info_bit_erasures: u64,
    /// Information bits per frame.
    pub k: usize,
    pub fer: f64,
    pub ber: f64,
    pub fer_ci95: (f64, f64),
    /// Erased decision messages per index, frozen indices included (genie runs only).
    pub per_bit_erasures: Option<Vec<u64>>,
}

impl SimOutcome {
    /// Binomial standard error of the FER estimate.
    pub fn fer_sigma(&self) -> f64 {
        binomial_sigma(self.fer, self.frames)
    }
}

pub fn binomial_sigma(rate: f64, trials: u64) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    (rate * (1.0 - rate) / trials as f64).sqrt()
}

/// Two-sided 95% interval for a binomial proportion.
///
/// Normal approximation, except Clopper-Pearson when fewer than ten
/// successes or failures were observed.
pub fn binomial_ci95(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let failures = trials - successes;
    if successes.min(failures) < EXACT_CI_THRESHOLD {
        let x = successes as f64;
        let n = trials as f64;
        let lo = if successes == 0 {
            0.0
        } else {
            Beta::new(x, n - x + 1.0)
                .map(|b| b.inverse_cdf(0.025))
                .unwrap_or(0.0)
        };
        let hi = if failures == 0 {
            1.0
        } else {
            Beta::new(x + 1.0, n - x)
                .map(|b| b.inverse_cdf(0.975))
                .unwrap_or(1.0)
        };
        return (lo, hi);
    }
    let rate = successes as f64 / trials as f64;
    let half = Z_95 * binomial_sigma(rate, trials);
    ((rate - half).max(0.0), (rate + half).min(1.0))
}

#[derive(Debug, Clone, Default)]
struct Counts {
    frames: u64,
    frame_erasures: u64,
    info_bit_erasures: u64,
    per_bit: Vec<u64>,
}

impl Counts {
    fn merge(mut self, other: Counts) -> Counts {
        self.frames += other.frames;
        self.frame_erasures += other.frame_erasures;
        self.info_bit_erasures += other.info_bit_erasures;
        if self.per_bit.is_empty() {
            self.per_bit = other.per_bit;
        } else {
            for (a, b) in self.per_bit.iter_mut().zip(other.per_bit) {
                *a += b;
            }
        }
        self
    }
}

struct Worker<'a> {
    config: &'a SimConfig,
    decoder: ScDecoder,
    u: Vec<u8>,
    x: Vec<u8>,
    y: Vec<Llr>,
    counts: Counts,
}

impl<'a> Worker<'a> {
    fn new(config: &'a SimConfig) -> Self {
        let len = config.code.len();
        Worker {
            config,
            decoder: ScDecoder::new(config.code.n()),
            u: vec![0; len],
            x: vec![0; len],
            y: Vec::with_capacity(len),
            counts: Counts {
                per_bit: if config.genie {
                    vec![0; len]
                } else {
                    Vec::new()
                },
                ..Counts::default()
            },
        }
    }

    fn run_trial(&mut self, trial: u64) -> Result<()> {
        let cfg = self.config;
        let code = &cfg.code;

        let mut source = substream(cfg.master_seed, trial, StreamRole::Source);
        self.u.fill(0);
        let mut word = 0u64;
        for (j, &i) in code.info_set().iter().enumerate() {
            if j % 64 == 0 {
                word = source.next_u64();
            }
            self.u[i] = ((word >> (j % 64)) & 1) as u8;
        }
        self.x.copy_from_slice(&self.u);
        encode_in_place(&mut self.x)?;

        let mut channel = substream(cfg.master_seed, trial, StreamRole::Channel);
        transmit_bec_into(&self.x, cfg.channel_erasure, &mut channel, &mut self.y);

        let mut faults = BernoulliFaults::new(
            cfg.fault.delta,
            substream(cfg.master_seed, trial, StreamRole::Faults),
        );
        let genie = cfg.genie.then_some(self.u.as_slice());
        let result = self
            .decoder
            .decode(&self.y, code, &cfg.fault, &mut faults, genie)?;

        self.counts.frames += 1;
        self.counts.frame_erasures += u64::from(result.frame_erased);
        self.counts.info_bit_erasures += result.info_bit_erasures as u64;
        if cfg.genie {
            for (count, m) in self.counts.per_bit.iter_mut().zip(&result.decision_llrs) {
                *count += u64::from(m.is_erased());
            }
        }
        Ok(())
    }
}

/// Runs `config.trials` encode/transmit/decode cycles on the current rayon pool.
pub fn run_simulation(config: &SimConfig) -> Result<SimOutcome> {
    config.validate()?;
    let counts = (0..config.trials)
        .into_par_iter()
        .try_fold(
            || Worker::new(config),
            |mut worker, trial| worker.run_trial(trial).map(|_| worker),
        )
        .map(|worker| worker.map(|w| w.counts))
        .try_reduce(Counts::default, |a, b| Ok(a.merge(b)))?;

    let k = config.code.k();
    let fer = counts.frame_erasures as f64 / counts.frames as f64;
    let ber = counts.info_bit_erasures as f64 / (counts.frames as f64 * k as f64);
    Ok(SimOutcome {
        frames: counts.frames,
        frame_erasures: counts.frame_erasures,
        info_bit_erasures: counts.info_bit_erasures,
        k,
        fer,
        ber,
        fer_ci95: binomial_ci95(counts.frame_erasures, counts.frames),
        per_bit_erasures: config.genie.then_some(counts.per_bit),
    })
}

/// Empirical FER set against the analytic sum of information-set reliabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxyComparison {
    pub fer: f64,
    pub proxy: f64,
    /// `fer / proxy`; 1 when both vanish.
    pub ratio: f64,
    pub sigma: f64,
    /// `fer <= proxy + 3 sigma`.
    pub within_union_bound: bool,
}

pub fn compare_to_proxy(outcome: &SimOutcome, code: &CodeConstruction) -> ProxyComparison {
    let proxy = fer_proxy(code).raw;
    let fer = outcome.fer;
    let ratio = if proxy == 0.0 {
        if fer == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        fer / proxy
    };
    let sigma = outcome.fer_sigma();
    ProxyComparison {
        fer,
        proxy,
        ratio,
        sigma,
        within_union_bound: fer <= proxy + 3.0 * sigma,
    }
}

/// Uniform info bits, for callers assembling frames by hand.
pub fn random_message<R: Rng + ?Sized>(code: &CodeConstruction, rng: &mut R) -> Vec<u8> {
    let mut u = vec![0u8; code.len()];
    for &i in code.info_set() {
        u[i] = rng.random_range(0..2);
    }
    u
}
