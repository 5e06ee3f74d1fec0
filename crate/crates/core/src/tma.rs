//! 1-bit time-modulated control of the transmissive elements.
//!
//! Each element switches between phase 0 (`+1`) and phase pi (`-1`) once per
//! symbol period. The positive first harmonic of that square wave carries
//! the composite symbol `x_n = A_n e^{j phi_n}`.

use std::f64::consts::PI;
use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::linalg::{CMat, CVec, C64};

/// Symbol period used when none is given (s).
pub const DEFAULT_PERIOD_S: f64 = 0.3e-6;

/// Fewest samples per period accepted by the demodulator.
pub const MIN_SAMPLES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositeSymbol {
    pub amplitude: f64,
    /// Phase in `[-pi, pi)`.
    pub phase: f64,
    pub max_amplitude: f64,
}

impl CompositeSymbol {
    pub fn new(amplitude: f64, phase: f64, max_amplitude: f64) -> Result<Self> {
        if !(amplitude >= 0.0) {
            return Err(invalid("amplitude", "must be non-negative"));
        }
        if !(max_amplitude > 0.0) {
            return Err(invalid("max_amplitude", "must be positive"));
        }
        if amplitude > max_amplitude * (1.0 + 1e-12) {
            return Err(invalid(
                "amplitude",
                format!("{amplitude} exceeds the frame maximum {max_amplitude}"),
            ));
        }
        Ok(CompositeSymbol {
            amplitude: amplitude.min(max_amplitude),
            phase: wrap_phase(phase),
            max_amplitude,
        })
    }

    /// The harmonic this symbol should produce: `(2/pi)(A/A_max)e^{j phi}`.
    pub fn target_harmonic(&self) -> C64 {
        C64::from_polar(2.0 / PI * self.amplitude / self.max_amplitude, self.phase)
    }

    pub fn with_max_amplitude(self, max_amplitude: f64) -> Result<Self> {
        CompositeSymbol::new(self.amplitude, self.phase, max_amplitude)
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_phase(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y >= PI {
        -PI
    } else {
        y
    }
}

/// `x_n = F_row . s`, returned as amplitude and phase. The normalisation
/// amplitude is set to `|x_n|` itself (or 1 when it vanishes); use
/// [`compose_frame`] for frame-level normalisation.
pub fn compose_symbol(row: &[C64], symbols: &[C64]) -> Result<CompositeSymbol> {
    if row.len() != symbols.len() {
        return Err(Error::Dimension(format!(
            "row has {} entries, symbol vector {}",
            row.len(),
            symbols.len()
        )));
    }
    let x: C64 = row.iter().zip(symbols).map(|(f, s)| f * s).sum();
    let a = x.norm();
    let scale = 1e-12 * row.iter().zip(symbols).map(|(f, s)| (f * s).norm()).sum::<f64>();
    if a <= scale {
        return CompositeSymbol::new(0.0, 0.0, 1.0);
    }
    CompositeSymbol::new(a, x.arg(), a)
}

/// Composite symbols for every element and every symbol vector of a frame,
/// normalised by the largest amplitude in the frame. Indexed `[time][element]`.
pub fn compose_frame(f: &CMat, frame: &[CVec]) -> Result<Vec<Vec<CompositeSymbol>>> {
    let mut raw = Vec::with_capacity(frame.len());
    for s in frame {
        if s.len() != f.ncols() {
            return Err(Error::Dimension("symbol vector length must equal K".into()));
        }
        let row_syms = (0..f.nrows())
            .map(|n| {
                let row: Vec<C64> = f.row(n).iter().copied().collect();
                compose_symbol(&row, s.as_slice())
            })
            .collect::<Result<Vec<_>>>()?;
        raw.push(row_syms);
    }
    let a_max = raw.iter().flatten().map(|s| s.amplitude).fold(0.0_f64, f64::max);
    let a_max = if a_max > 0.0 { a_max } else { 1.0 };
    raw.into_iter().map(|v| v.into_iter().map(|s| s.with_max_amplitude(a_max)).collect()).collect()
}

/// Switching parameters of one element over one period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TmaWaveform {
    pub t_on: f64,
    pub tau: f64,
    pub period: f64,
}

impl TmaWaveform {
    pub fn new(t_on: f64, tau: f64, period: f64) -> Result<Self> {
        if !(period > 0.0) {
            return Err(invalid("period", "must be positive"));
        }
        if !(0.0..period).contains(&t_on) {
            return Err(invalid("t_on", format!("{t_on} not in [0, {period})")));
        }
        if !(0.0..period).contains(&tau) {
            return Err(invalid("tau", format!("{tau} not in [0, {period})")));
        }
        Ok(TmaWaveform { t_on, tau, period })
    }

    /// True when the `+1` window runs past the end of the period.
    pub fn wraps(&self) -> bool {
        self.t_on + self.tau > self.period
    }
}

/// Switching parameters that put `sym` on the positive first harmonic.
pub fn map_to_waveform(sym: &CompositeSymbol, period: f64) -> Result<TmaWaveform> {
    if !(period > 0.0) {
        return Err(invalid("period", "must be positive"));
    }
    let sym = CompositeSymbol::new(sym.amplitude, sym.phase, sym.max_amplitude)?;
    if sym.amplitude == 0.0 {
        return TmaWaveform::new(0.0, 0.0, period);
    }
    let tau = period / PI * (sym.amplitude / sym.max_amplitude).min(1.0).asin();
    // -pi (2 t_on + tau) / T = phi + 2 k pi, with k chosen so t_on lands in [0, T).
    let mut t_on = (-sym.phase * period / (2.0 * PI) - tau / 2.0).rem_euclid(period);
    if t_on >= period {
        t_on = 0.0;
    }
    TmaWaveform::new(t_on, tau, period)
}

/// Instantaneous element state: `+1` (phase 0) or `-1` (phase pi).
pub fn waveform_phase(t: f64, w: &TmaWaveform) -> Result<C64> {
    if !(0.0..w.period).contains(&t) {
        return Err(invalid("t", format!("{t} not in [0, {})", w.period)));
    }
    Ok(C64::new(phase_sign(t, w), 0.0))
}

fn phase_sign(t: f64, w: &TmaWaveform) -> f64 {
    let on = if w.wraps() {
        !(t > w.t_on + w.tau - w.period && t <= w.t_on)
    } else {
        t > w.t_on && t <= w.t_on + w.tau
    };
    if on {
        1.0
    } else {
        -1.0
    }
}

fn alpha(f: f64, t_on: f64, tau: f64, period: f64) -> C64 {
    let mag = 2.0 / (PI * f * period) * (PI * f * tau).sin();
    C64::from_polar(1.0, -PI * f * (2.0 * t_on + tau)) * mag
}

/// Fourier-series transform `(1/T) int_0^T s(t) e^{-j 2 pi f t} dt`.
/// At `f = 0` the time average is returned.
pub fn spectrum(f: f64, w: &TmaWaveform) -> C64 {
    let t = w.period;
    if f == 0.0 {
        return C64::from((2.0 * w.tau - t) / t);
    }
    let tail = C64::i() * (C64::from_polar(1.0, -2.0 * PI * f * t) - 1.0) / (2.0 * PI * f * t);
    if w.wraps() {
        alpha(f, w.t_on, w.tau - t, t) + tail
    } else {
        alpha(f, w.t_on, w.tau, t) - tail
    }
}

/// Peak of the `q`-th harmonic, `(2/(pi q)) sin(pi q tau/T) e^{-j pi q (2 t_on + tau)/T}`.
pub fn harmonic_peak(q: i32, w: &TmaWaveform) -> Result<C64> {
    if q == 0 {
        return Err(invalid("q", "harmonic order must be non-zero"));
    }
    let q = q as f64;
    let t = w.period;
    let mag = 2.0 / (PI * q) * (PI * q * w.tau / t).sin();
    Ok(C64::from_polar(1.0, -PI * q * (2.0 * w.t_on + w.tau) / t) * mag)
}

/// Samples one period of the waveform with an integrate-and-dump front end:
/// sample `m` is the mean of the waveform over `[m T/M, (m+1) T/M)`.
pub fn sample_waveform(w: &TmaWaveform, samples: usize) -> Vec<C64> {
    let dt = w.period / samples as f64;
    // The +1 set as a union of intervals inside [0, T].
    let on: Vec<(f64, f64)> = if w.wraps() {
        vec![(0.0, w.t_on + w.tau - w.period), (w.t_on, w.period)]
    } else {
        vec![(w.t_on, w.t_on + w.tau)]
    };
    (0..samples)
        .map(|m| {
            let (a, b) = (m as f64 * dt, (m + 1) as f64 * dt);
            let covered: f64 = on.iter().map(|&(lo, hi)| (hi.min(b) - lo.max(a)).max(0.0)).sum();
            let frac = covered / dt;
            C64::new(2.0 * frac - 1.0, 0.0)
        })
        .collect()
}

/// First-harmonic coefficient of one period of integrate-and-dump samples.
///
/// The DFT bin at `+1/T` is taken at the cell centres and divided by the
/// `sinc(pi/M)` gain of the averaging front end, so an ideal waveform maps
/// onto [`harmonic_peak`]`(1, w)` up to aliasing of order `1/M^2`.
pub fn demodulate_first_harmonic(samples: &[C64], sample_rate: f64) -> Result<C64> {
    let m = samples.len();
    if m < MIN_SAMPLES {
        return Err(invalid("samples", format!("{m} samples per period, at least {MIN_SAMPLES} required")));
    }
    if !(sample_rate > 0.0) {
        return Err(invalid("sample_rate", "must be positive"));
    }
    let mf = m as f64;
    let acc: C64 = samples
        .iter()
        .enumerate()
        .map(|(i, s)| s * C64::from_polar(1.0, -2.0 * PI * (i as f64 + 0.5) / mf))
        .sum();
    let x = PI / mf;
    Ok(acc / mf / (x.sin() / x))
}

/// Writes `element,t_over_Tp,state` rows (state 1 for phase 0, 0 for phase pi).
pub fn write_waveform_csv<W: Write>(
    out: &mut W,
    waveforms: &[TmaWaveform],
    samples: usize,
) -> std::io::Result<()> {
    writeln!(out, "element,t_over_Tp,state")?;
    for (n, w) in waveforms.iter().enumerate() {
        for m in 0..samples {
            let u = m as f64 / samples as f64;
            let state = if phase_sign(u * w.period, w) > 0.0 { 1 } else { 0 };
            writeln!(out, "{n},{u:.6},{state}")?;
        }
    }
    Ok(())
}
