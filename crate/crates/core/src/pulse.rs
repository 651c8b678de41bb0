//! Transmit pulse model: a tone burst under a raised-cosine (Hann) envelope.
//!
//! The same closed form drives both the time-domain echo synthesiser and the
//! per-frequency source weighting of the beamformer, so simulated data and
//! imaging operators share one pulse by construction. The spectrum uses the
//! `exp(+i*omega*t)` analysis kernel, matching the crate-wide `exp(-i*omega*t)`
//! time dependence.

use crate::error::{Error, Result};
use crate::scalar::{cast, Scalar};
use num_complex::Complex;

/// Tone burst of `cycles` carrier periods at `center_frequency`, windowed by a
/// Hann envelope spanning the whole burst. Support is `[0, duration()]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse<T: Scalar> {
    center_frequency: T,
    cycles: u32,
}

impl<T: Scalar> Pulse<T> {
    pub fn new(center_frequency: T, cycles: u32) -> Result<Self> {
        if !(center_frequency.is_finite() && center_frequency > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "pulse center frequency must be finite and positive, got {center_frequency}"
            )));
        }
        if cycles == 0 {
            return Err(Error::InvalidParameter(
                "pulse must contain at least one carrier cycle".into(),
            ));
        }
        Ok(Self { center_frequency, cycles })
    }

    /// Centre frequency (Hz).
    pub fn center_frequency(&self) -> T {
        self.center_frequency
    }

    pub fn cycles(&self) -> u32 {
        self.cycles
    }

    /// Burst duration (s).
    pub fn duration(&self) -> T {
        cast::<T>(self.cycles as f64) / self.center_frequency
    }

    /// Time-domain sample at `t` seconds after the burst onset.
    pub fn sample(&self, t: T) -> T {
        let duration = self.duration();
        if t <= T::zero() || t >= duration {
            return T::zero();
        }
        let a = cast::<T>(2.0) * T::PI() * self.center_frequency;
        let envelope_phase = T::PI() * t / duration;
        (a * t).sin() * envelope_phase.sin() * envelope_phase.sin()
    }

    /// Analytic spectrum `S(omega) = integral s(t) exp(+i*omega*t) dt`.
    ///
    /// The windowed burst decomposes into three finite tones,
    /// `s(t) = sin(a t)/2 - sin((a+b) t)/4 - sin((a-b) t)/4` with
    /// `a = 2*pi*f0` and `b = a/cycles`, each of which integrates to a shifted
    /// Dirichlet-style kernel.
    pub fn spectrum(&self, omega: T) -> Complex<T> {
        let a = cast::<T>(2.0) * T::PI() * self.center_frequency;
        let b = a / cast::<T>(self.cycles as f64);
        let duration = self.duration();
        let half = cast::<T>(0.5);
        let quarter = cast::<T>(0.25);
        sine_tone_spectrum(a, omega, duration).scale(half)
            - sine_tone_spectrum(a + b, omega, duration).scale(quarter)
            - sine_tone_spectrum(a - b, omega, duration).scale(quarter)
    }
}

/// `integral_0^T sin(c t) exp(+i w t) dt`.
fn sine_tone_spectrum<T: Scalar>(c: T, w: T, duration: T) -> Complex<T> {
    let e_plus = finite_exponential(w + c, duration);
    let e_minus = finite_exponential(w - c, duration);
    // 1/(2i) = -i/2.
    (e_plus - e_minus) * Complex::new(T::zero(), -cast::<T>(0.5))
}

/// `integral_0^T exp(+i q t) dt = T exp(i q T / 2) sinc(q T / 2)`.
fn finite_exponential<T: Scalar>(q: T, duration: T) -> Complex<T> {
    let half_phase = q * duration / cast(2.0);
    Complex::from_polar(duration, half_phase).scale(sinc(half_phase))
}

/// `sin(x)/x` with a series fallback near zero.
fn sinc<T: Scalar>(x: T) -> T {
    if x.abs() < cast(1e-4) {
        let x2 = x * x;
        T::one() - x2 / cast(6.0) + x2 * x2 / cast(120.0)
    } else {
        x.sin() / x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn support_is_one_burst() {
        let p = Pulse::new(5e6f64, 1).unwrap();
        assert_relative_eq!(p.duration(), 0.2e-6);
        assert_eq!(p.sample(-1e-9), 0.0);
        assert_eq!(p.sample(0.0), 0.0);
        assert_eq!(p.sample(0.2e-6), 0.0);
        assert_eq!(p.sample(1.0), 0.0);
        assert!(p.sample(0.05e-6) > 0.0);
    }

    #[test]
    fn envelope_tapers_smoothly() {
        let p = Pulse::new(5e6f64, 1).unwrap();
        // Early and late samples are much smaller than mid-burst ones.
        let early = p.sample(0.005e-6).abs();
        let mid = p.sample(0.05e-6).abs();
        assert!(early < 0.1 * mid);
    }

    #[test]
    fn degenerate_parameters_rejected() {
        assert!(Pulse::<f64>::new(0.0, 1).is_err());
        assert!(Pulse::<f64>::new(f64::NAN, 1).is_err());
        assert!(Pulse::<f64>::new(5e6, 0).is_err());
    }

    /// Independent oracle: trapezoid quadrature of the defining integral.
    fn numeric_spectrum(p: &Pulse<f64>, omega: f64) -> Complex<f64> {
        let duration = p.duration();
        let n = 40_000usize;
        let dt = duration / n as f64;
        let mut acc = Complex::new(0.0, 0.0);
        for k in 0..=n {
            let t = k as f64 * dt;
            let weight = if k == 0 || k == n { 0.5 } else { 1.0 };
            acc += Complex::from_polar(p.sample(t), omega * t).scale(weight);
        }
        acc.scale(dt)
    }

    #[test]
    fn closed_form_matches_quadrature() {
        let p = Pulse::new(5e6f64, 1).unwrap();
        let scale = p.spectrum(2.0 * std::f64::consts::PI * 5e6).norm();
        for f in [1.0e6, 3.9e6, 5.0e6, 7.1e6, 10.295e6, 14.0e6] {
            let w = 2.0 * std::f64::consts::PI * f;
            let analytic = p.spectrum(w);
            let numeric = numeric_spectrum(&p, w);
            assert_relative_eq!(analytic.re, numeric.re, epsilon = 1e-9 * scale);
            assert_relative_eq!(analytic.im, numeric.im, epsilon = 1e-9 * scale);
        }
    }

    #[test]
    fn closed_form_matches_quadrature_multi_cycle() {
        let p = Pulse::new(7.1e6f64, 3).unwrap();
        let scale = p.spectrum(2.0 * std::f64::consts::PI * 7.1e6).norm();
        for f in [2.0e6, 7.1e6, 9.5e6] {
            let w = 2.0 * std::f64::consts::PI * f;
            let analytic = p.spectrum(w);
            let numeric = numeric_spectrum(&p, w);
            assert_relative_eq!(analytic.re, numeric.re, epsilon = 1e-8 * scale);
            assert_relative_eq!(analytic.im, numeric.im, epsilon = 1e-8 * scale);
        }
    }

    #[test]
    fn spectrum_peaks_near_center_frequency() {
        let p = Pulse::new(5e6f64, 1).unwrap();
        let mag = |f: f64| p.spectrum(2.0 * std::f64::consts::PI * f).norm();
        assert!(mag(5e6) > mag(1.5e6));
        assert!(mag(5e6) > mag(12e6));
        // A single-cycle burst stays broadband: band edges keep real energy.
        assert!(mag(3.9e6) > 0.3 * mag(5e6));
        assert!(mag(10.295e6) > 0.05 * mag(5e6));
    }
}
