//! Analytic sweeps built on density evolution: sorted-reliability staircase,
//! FER proxy versus rate, protection sweeps and rate loss.

use crate::construction::{
    evolve_all, rate_loss, rate_loss_percent_of_capacity, reliability_order, CodeConstruction,
};
use crate::error::{Error, Result};
use crate::transfer::{FaultSpec, Probability};

/// Sum of information-set erasure probabilities, the usual FER estimate for
/// SC decoding on the BEC. It is a union bound, so `raw` may exceed 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FerProxy {
    pub raw: f64,
    pub clamped: f64,
}

pub fn fer_proxy(code: &CodeConstruction) -> FerProxy {
    proxy_over(code.reliabilities(), code.info_set())
}

fn proxy_over(reliabilities: &[f64], info_set: &[usize]) -> FerProxy {
    let raw: f64 = info_set.iter().map(|&i| reliabilities[i]).sum();
    FerProxy {
        raw,
        clamped: raw.min(1.0),
    }
}

/// `R = 0.05, 0.10, ..., 0.95`.
pub fn default_rate_grid() -> Vec<f64> {
    (1..20).map(|i| i as f64 / 20.0).collect()
}

/// Information set size for rate `rate` at block length `len`:
/// `round(rate * len)`, ties to even. Must land strictly between 0 and `len`.
pub fn rate_to_k(rate: f64, len: usize) -> Result<usize> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::invalid(format!("rate {rate} must lie in (0, 1)")));
    }
    let k = (rate * len as f64).round_ties_even() as usize;
    if k == 0 || k >= len {
        return Err(Error::invalid(format!(
            "rate {rate} gives k = {k}, outside (0, {len})"
        )));
    }
    Ok(k)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Values {
    Real(Vec<f64>),
    Count(Vec<u64>),
}

impl Values {
    pub fn len(&self) -> usize {
        match self {
            Values::Real(v) => v.len(),
            Values::Count(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_real(&self) -> Option<&[f64]> {
        match self {
            Values::Real(v) => Some(v),
            Values::Count(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub values: Values,
}

/// One figure's worth of data: an abscissa, named ordinates of equal length,
/// and the parameters that regenerate it.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis_name: String,
    pub axis: Vec<f64>,
    pub series: Vec<Series>,
    pub metadata: Vec<(String, String)>,
}

impl SweepResult {
    fn new(axis_name: &str, axis: Vec<f64>) -> Self {
        SweepResult {
            axis_name: axis_name.to_string(),
            axis,
            series: Vec::new(),
            metadata: Vec::new(),
        }
    }

    fn push(&mut self, name: impl Into<String>, values: Values) {
        debug_assert_eq!(values.len(), self.axis.len());
        self.series.push(Series {
            name: name.into(),
            values,
        });
    }

    fn meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    pub fn series(&self, name: &str) -> Option<&Values> {
        self.series
            .iter()
            .find(|s| s.name == name)
            .map(|s| &s.values)
    }

    /// Real-valued series by name.
    pub fn real(&self, name: &str) -> Option<&[f64]> {
        self.series(name).and_then(Values::as_real)
    }
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:e}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn describe_fault(result: &mut SweepResult, n: usize, fault: &FaultSpec) {
    result.meta("delta", format!("{:e}", fault.delta.get()));
    result.meta("faulty_steps", fault.faulty_steps(n));
}

/// FER proxy of each rate's code, all designed from one density-evolution run.
///
/// Series: `k`, `realized_rate`, `proxy` (raw sum), `proxy_clamped`.
pub fn fer_vs_rate_sweep(
    n: usize,
    p: Probability,
    fault: &FaultSpec,
    rates: &[f64],
) -> Result<SweepResult> {
    let z = evolve_all(n, p, fault)?;
    fer_vs_rate_from(&z, rates).map(|mut result| {
        result.meta("n", n);
        result.meta("p", format!("{:e}", p.get()));
        describe_fault(&mut result, n, fault);
        result.meta("rates", join(rates));
        result
    })
}

fn fer_vs_rate_from(z: &[f64], rates: &[f64]) -> Result<SweepResult> {
    let len = z.len();
    let order = reliability_order(z);
    let mut ks = Vec::with_capacity(rates.len());
    let mut realized = Vec::with_capacity(rates.len());
    let mut raw = Vec::with_capacity(rates.len());
    let mut clamped = Vec::with_capacity(rates.len());
    for &rate in rates {
        let k = rate_to_k(rate, len)?;
        let mut info = order[..k].to_vec();
        info.sort_unstable();
        let proxy = proxy_over(z, &info);
        ks.push(k as u64);
        realized.push(k as f64 / len as f64);
        raw.push(proxy.raw);
        clamped.push(proxy.clamped);
    }
    let mut result = SweepResult::new("rate", rates.to_vec());
    result.push("k", Values::Count(ks));
    result.push("realized_rate", Values::Real(realized));
    result.push("proxy", Values::Real(raw));
    result.push("proxy_clamped", Values::Real(clamped));
    Ok(result)
}

/// Reliabilities sorted ascending against the index fraction `(i + 1) / N`.
pub fn staircase(n: usize, p: Probability, fault: &FaultSpec) -> Result<SweepResult> {
    let mut z = evolve_all(n, p, fault)?;
    z.sort_unstable_by(f64::total_cmp);
    let len = z.len() as f64;
    let axis = (1..=z.len()).map(|i| i as f64 / len).collect();
    let mut result = SweepResult::new("fraction", axis);
    result.push("z", Values::Real(z));
    result.meta("n", n);
    result.meta("p", format!("{:e}", p.get()));
    describe_fault(&mut result, n, fault);
    Ok(result)
}

/// One FER-versus-rate series per protected level count.
///
/// Series: `k`, then `np=<v>` (raw proxy) for each requested `n_p`.
pub fn protection_sweep(
    n: usize,
    p: Probability,
    delta: Probability,
    n_p_values: &[usize],
    rates: &[f64],
) -> Result<SweepResult> {
    let mut result = SweepResult::new("rate", rates.to_vec());
    let len = 1usize << n.min(usize::BITS as usize - 1);
    let ks = rates
        .iter()
        .map(|&r| rate_to_k(r, len).map(|k| k as u64))
        .collect::<Result<Vec<_>>>()?;
    result.push("k", Values::Count(ks));
    for &n_p in n_p_values {
        let fault = FaultSpec::unprotected(delta).with_protected_levels(n, n_p)?;
        let z = evolve_all(n, p, &fault)?;
        let sweep = fer_vs_rate_from(&z, rates)?;
        let proxies = sweep.real("proxy").expect("proxy series").to_vec();
        result.push(format!("np={n_p}"), Values::Real(proxies));
    }
    result.meta("n", n);
    result.meta("p", format!("{:e}", p.get()));
    result.meta("delta", format!("{:e}", delta.get()));
    result.meta(
        "np",
        n_p_values
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    result.meta("rates", join(rates));
    Ok(result)
}

/// Rate loss per `(delta, n_u)`.
///
/// Series per delta: `loss[delta=<d>]` (absolute) and `percent[delta=<d>]`
/// (percentage of capacity `1 - p`).
pub fn rate_loss_sweep(
    p: Probability,
    deltas: &[Probability],
    n_u_values: &[usize],
) -> Result<SweepResult> {
    let axis = n_u_values.iter().map(|&v| v as f64).collect();
    let mut result = SweepResult::new("n_u", axis);
    for &delta in deltas {
        let loss = n_u_values
            .iter()
            .map(|&n_u| rate_loss(p, delta, n_u))
            .collect();
        let percent = n_u_values
            .iter()
            .map(|&n_u| rate_loss_percent_of_capacity(p, delta, n_u))
            .collect::<Result<Vec<_>>>()?;
        let tag = format!("{:e}", delta.get());
        result.push(format!("loss[delta={tag}]"), Values::Real(loss));
        result.push(format!("percent[delta={tag}]"), Values::Real(percent));
    }
    result.meta("p", format!("{:e}", p.get()));
    result.meta(
        "deltas",
        deltas
            .iter()
            .map(|d| format!("{:e}", d.get()))
            .collect::<Vec<_>>()
            .join(","),
    );
    result.meta(
        "nu",
        n_u_values
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    Ok(result)
}
