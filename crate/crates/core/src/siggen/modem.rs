//! Complex-baseband modulators for the six families.
//!
//! All modulators run at the same sample rate. The single-carrier families
//! produce exactly `samples_per_symbol` samples per symbol; OFDM produces one
//! `fft_len + cp_len` sample block per OFDM symbol.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{GenConfig, ModulationFamily};
use crate::error::{Error, Result};

/// Per-family modem parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModemParams {
    /// OOK "on" amplitude.
    pub ook_amplitude: f64,
    /// Root-raised-cosine roll-off for DBPSK/DQPSK.
    pub psk_rolloff: f64,
    /// RRC filter span in symbols.
    pub psk_span: usize,
    pub gfsk_index: f64,
    pub gfsk_bt: f64,
    pub gmsk_index: f64,
    pub gmsk_bt: f64,
    /// Gaussian frequency filter span in symbols.
    pub gaussian_span: usize,
    /// OFDM FFT size. Bins DC and Nyquist are nulls, bins ±fft_len/4 carry pilots.
    pub ofdm_fft_len: usize,
    pub ofdm_cp_len: usize,
}

impl Default for ModemParams {
    fn default() -> Self {
        Self {
            ook_amplitude: 1.0,
            psk_rolloff: 0.35,
            psk_span: 8,
            gfsk_index: 1.0,
            gfsk_bt: 0.35,
            gmsk_index: 0.5,
            gmsk_bt: 0.3,
            gaussian_span: 4,
            ofdm_fft_len: 16,
            ofdm_cp_len: 4,
        }
    }
}

impl ModemParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.ook_amplitude > 0.0 && self.ook_amplitude.is_finite()) {
            return bad("ook_amplitude must be positive");
        }
        if !(0.0..=1.0).contains(&self.psk_rolloff) || self.psk_rolloff == 0.0 {
            return bad("psk_rolloff must lie in (0, 1]");
        }
        if self.psk_span == 0 || self.gaussian_span == 0 {
            return bad("filter spans must be at least one symbol");
        }
        for (name, v) in [
            ("gfsk_index", self.gfsk_index),
            ("gfsk_bt", self.gfsk_bt),
            ("gmsk_index", self.gmsk_index),
            ("gmsk_bt", self.gmsk_bt),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.ofdm_fft_len < 8 || !self.ofdm_fft_len.is_multiple_of(4) {
            return bad("ofdm_fft_len must be a multiple of 4 and at least 8");
        }
        if self.ofdm_cp_len >= self.ofdm_fft_len {
            return bad("ofdm_cp_len must be shorter than the FFT");
        }
        Ok(())
    }

    /// Number of data-bearing OFDM subcarriers (FFT bins minus DC, Nyquist and two pilots).
    pub fn ofdm_data_carriers(&self) -> usize {
        self.ofdm_fft_len - 4
    }

    pub fn ofdm_symbol_len(&self) -> usize {
        self.ofdm_fft_len + self.ofdm_cp_len
    }
}

/// Bits of `payload`, most significant bit first.
pub(crate) fn bits_msb_first(payload: &[u8]) -> impl Iterator<Item = bool> + '_ {
    payload
        .iter()
        .flat_map(|&b| (0..8).rev().map(move |i| (b >> i) & 1 == 1))
}

/// Payload bytes needed for `family` to produce at least `samples` samples.
pub fn payload_bytes_for(family: ModulationFamily, samples: usize, cfg: &GenConfig) -> usize {
    let bits = match family {
        ModulationFamily::Ofdm => {
            let sym = cfg.modem.ofdm_symbol_len();
            samples.div_ceil(sym) * 2 * cfg.modem.ofdm_data_carriers()
        }
        ModulationFamily::Dqpsk => samples.div_ceil(cfg.samples_per_symbol) * 2,
        _ => samples.div_ceil(cfg.samples_per_symbol),
    };
    bits.div_ceil(8).max(1)
}

/// Modulates `payload` into a complex baseband stream.
pub fn modulate(family: ModulationFamily, payload: &[u8], cfg: &GenConfig) -> Result<Vec<Complex64>> {
    if payload.is_empty() {
        return Err(Error::Config("payload must be non-empty".into()));
    }
    cfg.validate()?;
    let sps = cfg.samples_per_symbol;
    let m = &cfg.modem;
    let out = match family {
        ModulationFamily::Ook => ook(payload, sps, m.ook_amplitude),
        ModulationFamily::Dbpsk => {
            let symbols = differential_bpsk(payload);
            pulse_shape(&symbols, &rrc_taps(m.psk_rolloff, m.psk_span, sps), sps)
        }
        ModulationFamily::Dqpsk => {
            let symbols = differential_qpsk(payload);
            pulse_shape(&symbols, &rrc_taps(m.psk_rolloff, m.psk_span, sps), sps)
        }
        ModulationFamily::Gfsk => gaussian_fsk(payload, sps, m.gfsk_index, m.gfsk_bt, m.gaussian_span),
        ModulationFamily::Gmsk => gaussian_fsk(payload, sps, m.gmsk_index, m.gmsk_bt, m.gaussian_span),
        ModulationFamily::Ofdm => ofdm(payload, m),
    };
    Ok(out)
}

fn ook(payload: &[u8], sps: usize, amplitude: f64) -> Vec<Complex64> {
    bits_msb_first(payload)
        .flat_map(|bit| {
            let level = if bit { amplitude } else { 0.0 };
            std::iter::repeat_n(Complex64::new(level, 0.0), sps)
        })
        .collect()
}

/// DBPSK symbols: a 1 bit toggles the phase by pi, a 0 bit keeps it.
fn differential_bpsk(payload: &[u8]) -> Vec<Complex64> {
    let mut phase = 0.0_f64;
    bits_msb_first(payload)
        .map(|bit| {
            if bit {
                phase = (phase + PI) % (2.0 * PI);
            }
            Complex64::from_polar(1.0, phase)
        })
        .collect()
}

/// DQPSK symbols with Gray-coded phase increments 00→0, 01→π/2, 11→π, 10→3π/2.
fn differential_qpsk(payload: &[u8]) -> Vec<Complex64> {
    let bits: Vec<bool> = bits_msb_first(payload).collect();
    let mut quadrant = 0u8;
    bits.chunks_exact(2)
        .map(|pair| {
            let step = match (pair[0], pair[1]) {
                (false, false) => 0,
                (false, true) => 1,
                (true, true) => 2,
                (true, false) => 3,
            };
            quadrant = (quadrant + step) % 4;
            Complex64::from_polar(1.0, f64::from(quadrant) * PI / 2.0)
        })
        .collect()
}

/// Root-raised-cosine taps normalized to unit energy; `span * sps + 1` taps.
pub(crate) fn rrc_taps(rolloff: f64, span: usize, sps: usize) -> Vec<f64> {
    let n = span * sps;
    let b = rolloff;
    let mut taps: Vec<f64> = (0..=n)
        .map(|i| {
            let t = (i as f64 - n as f64 / 2.0) / sps as f64;
            if t.abs() < 1e-12 {
                1.0 - b + 4.0 * b / PI
            } else if (t.abs() - 1.0 / (4.0 * b)).abs() < 1e-9 {
                b / 2f64.sqrt()
                    * ((1.0 + 2.0 / PI) * (PI / (4.0 * b)).sin() + (1.0 - 2.0 / PI) * (PI / (4.0 * b)).cos())
            } else {
                let num = (PI * t * (1.0 - b)).sin() + 4.0 * b * t * (PI * t * (1.0 + b)).cos();
                let den = PI * t * (1.0 - (4.0 * b * t).powi(2));
                num / den
            }
        })
        .collect();
    let energy: f64 = taps.iter().map(|h| h * h).sum();
    let norm = energy.sqrt();
    taps.iter_mut().for_each(|h| *h /= norm);
    taps
}

/// Gaussian frequency-pulse filter taps normalized to unit DC gain.
pub(crate) fn gaussian_taps(bt: f64, span: usize, sps: usize) -> Vec<f64> {
    let n = span * sps;
    let alpha = 2.0 * PI * PI * bt * bt / LN_2;
    let mut taps: Vec<f64> = (0..=n)
        .map(|i| {
            let t = (i as f64 - n as f64 / 2.0) / sps as f64;
            (-alpha * t * t).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|h| *h /= sum);
    taps
}

/// Upsamples `symbols` by `sps` and filters with `taps`, compensating the
/// filter delay so the output has exactly `symbols.len() * sps` samples.
fn pulse_shape(symbols: &[Complex64], taps: &[f64], sps: usize) -> Vec<Complex64> {
    let len = symbols.len() * sps;
    let delay = (taps.len() - 1) / 2;
    (0..len)
        .map(|n| {
            let centre = n + delay;
            // output[n] = sum_k a_k h[n + delay - k*sps]
            let k_lo = (centre + 1).saturating_sub(taps.len()).div_ceil(sps);
            let k_hi = (centre / sps).min(symbols.len() - 1);
            (k_lo..=k_hi).map(|k| symbols[k] * taps[centre - k * sps]).sum()
        })
        .collect()
}

/// Continuous-phase FSK with a Gaussian-filtered NRZ frequency pulse.
fn gaussian_fsk(payload: &[u8], sps: usize, index: f64, bt: f64, span: usize) -> Vec<Complex64> {
    let nrz: Vec<f64> = bits_msb_first(payload)
        .flat_map(|bit| std::iter::repeat_n(if bit { 1.0 } else { -1.0 }, sps))
        .collect();
    let taps = gaussian_taps(bt, span, sps);
    let delay = (taps.len() - 1) / 2;
    let step = PI * index / sps as f64;
    let mut phase = 0.0_f64;
    (0..nrz.len())
        .map(|n| {
            let centre = n + delay;
            let lo = (centre + 1).saturating_sub(taps.len());
            let hi = centre.min(nrz.len() - 1);
            let freq: f64 = (lo..=hi).map(|j| nrz[j] * taps[centre - j]).sum();
            phase = (phase + step * freq).rem_euclid(2.0 * PI);
            Complex64::from_polar(1.0, phase)
        })
        .collect()
}

/// Subcarrier roles for an `fft_len`-point OFDM symbol, in natural FFT bin order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Carrier {
    Null,
    Pilot(f64),
    Data,
}

pub(crate) fn ofdm_layout(fft_len: usize) -> Vec<Carrier> {
    let quarter = fft_len / 4;
    (0..fft_len)
        .map(|bin| match bin {
            0 => Carrier::Null,
            b if b == fft_len / 2 => Carrier::Null,
            b if b == quarter => Carrier::Pilot(1.0),
            b if b == fft_len - quarter => Carrier::Pilot(-1.0),
            _ => Carrier::Data,
        })
        .collect()
}

/// QPSK-per-subcarrier OFDM with a cyclic prefix.
fn ofdm(payload: &[u8], m: &ModemParams) -> Vec<Complex64> {
    let layout = ofdm_layout(m.ofdm_fft_len);
    let bits_per_symbol = 2 * m.ofdm_data_carriers();
    let mut bits: Vec<bool> = bits_msb_first(payload).collect();
    bits.resize(bits.len().div_ceil(bits_per_symbol) * bits_per_symbol, false);

    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(m.ofdm_fft_len);
    let scale = 1.0 / (m.ofdm_fft_len as f64).sqrt();
    let amp = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(bits.len() / bits_per_symbol * m.ofdm_symbol_len());
    for chunk in bits.chunks_exact(bits_per_symbol) {
        let mut data = chunk.chunks_exact(2);
        let mut buf: Vec<Complex64> = layout
            .iter()
            .map(|c| match c {
                Carrier::Null => Complex64::new(0.0, 0.0),
                Carrier::Pilot(v) => Complex64::new(*v, 0.0),
                Carrier::Data => {
                    let pair = data.next().expect("layout and bit count agree");
                    // Gray-coded QPSK: bit 0 selects the I sign, bit 1 the Q sign.
                    let i = if pair[0] { -amp } else { amp };
                    let q = if pair[1] { -amp } else { amp };
                    Complex64::new(i, q)
                }
            })
            .collect();
        ifft.process(&mut buf);
        buf.iter_mut().for_each(|x| *x *= scale);
        out.extend_from_slice(&buf[m.ofdm_fft_len - m.ofdm_cp_len..]);
        out.extend_from_slice(&buf);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> GenConfig {
        GenConfig::default()
    }

    #[test]
    fn ook_all_ones_is_constant_envelope() {
        let s = modulate(ModulationFamily::Ook, &[0xFF; 4], &cfg()).unwrap();
        assert_eq!(s.len(), 320);
        assert!(s.iter().all(|x| x.re == 1.0 && x.im == 0.0));
    }

    #[test]
    fn ook_alternating_blocks() {
        let s = modulate(ModulationFamily::Ook, &[0xAA], &cfg()).unwrap();
        assert_eq!(s.len(), 80);
        for (i, x) in s.iter().enumerate() {
            let on = (i / 10) % 2 == 0;
            assert_eq!(x.re, if on { 1.0 } else { 0.0 }, "sample {i}");
            assert_eq!(x.im, 0.0);
        }
    }

    #[test]
    fn dbpsk_zero_bits_keep_constant_phase() {
        let s = modulate(ModulationFamily::Dbpsk, &[0u8; 8], &cfg()).unwrap();
        assert_eq!(s.len(), 640);
        // Away from the filter ramps every sample sits at phase zero.
        let interior = &s[50..590];
        assert!(interior.iter().all(|x| x.im.abs() < 1e-12 && x.re > 0.0));
    }

    #[test]
    fn dqpsk_increments_are_gray_coded() {
        // 00 01 11 10 -> quadrant steps 0,1,2,3 -> absolute 0,1,3,2
        let symbols = differential_qpsk(&[0b0001_1110]);
        let quadrants: Vec<i64> = symbols
            .iter()
            .map(|s| ((s.arg().rem_euclid(2.0 * PI)) / (PI / 2.0)).round() as i64 % 4)
            .collect();
        assert_eq!(quadrants, vec![0, 1, 3, 2]);
    }

    #[test]
    fn gmsk_and_gfsk_are_constant_modulus() {
        let payload: Vec<u8> = (0..64u8).map(|b| b.wrapping_mul(37)).collect();
        for fam in [ModulationFamily::Gmsk, ModulationFamily::Gfsk] {
            let s = modulate(fam, &payload, &cfg()).unwrap();
            assert!(s.iter().all(|x| (x.norm() - 1.0).abs() < 1e-6));
        }
    }

    #[test]
    fn gmsk_phase_advances_half_pi_per_steady_symbol() {
        let s = modulate(ModulationFamily::Gmsk, &[0xFF; 4], &cfg()).unwrap();
        let step = (s[200] * s[190].conj()).arg();
        assert!((step - PI / 2.0).abs() < 1e-9, "{step}");
    }

    #[test]
    fn rrc_taps_have_unit_energy_and_symmetry() {
        let taps = rrc_taps(0.35, 8, 10);
        assert_eq!(taps.len(), 81);
        let e: f64 = taps.iter().map(|h| h * h).sum();
        assert!((e - 1.0).abs() < 1e-12);
        for i in 0..taps.len() {
            assert!((taps[i] - taps[taps.len() - 1 - i]).abs() < 1e-12);
        }
    }

    #[test]
    fn ofdm_symbols_carry_cyclic_prefix() {
        let m = ModemParams::default();
        let s = modulate(ModulationFamily::Ofdm, &[0x5A; 6], &cfg()).unwrap();
        assert_eq!(s.len(), 2 * m.ofdm_symbol_len());
        for sym in s.chunks_exact(m.ofdm_symbol_len()) {
            for k in 0..m.ofdm_cp_len {
                assert!((sym[k] - sym[k + m.ofdm_fft_len]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn ofdm_layout_counts() {
        let layout = ofdm_layout(16);
        let data = layout.iter().filter(|c| **c == Carrier::Data).count();
        let nulls = layout.iter().filter(|c| **c == Carrier::Null).count();
        assert_eq!((data, nulls), (12, 2));
    }

    #[test]
    fn empty_payload_rejected() {
        assert!(modulate(ModulationFamily::Ook, &[], &cfg()).is_err());
    }
}
