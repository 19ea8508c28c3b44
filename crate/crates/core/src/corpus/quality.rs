//! Frame-energy SNR and component-based SRR, both in decibels.

use crate::error::{Error, Result};

/// Mean-square energy of each full frame.
pub fn frame_energies(waveform: &[f64], frame_len: usize, hop: usize) -> Result<Vec<f64>> {
    if frame_len == 0 || hop == 0 {
        return Err(Error::Data("frame_len and hop must be >= 1".into()));
    }
    if waveform.len() < frame_len {
        return Err(Error::Data(format!(
            "waveform of {} samples is shorter than one frame ({frame_len})",
            waveform.len()
        )));
    }
    Ok((0..=waveform.len() - frame_len)
        .step_by(hop)
        .map(|start| {
            let frame = &waveform[start..start + frame_len];
            frame.iter().map(|x| x * x).sum::<f64>() / frame_len as f64
        })
        .collect())
}

/// The quietest tenth of frames (at least one) estimates the noise floor and
/// the rest the signal. Returns `f64::INFINITY` when that floor is zero.
pub fn snr_estimate(waveform: &[f64], frame_len: usize, hop: usize) -> Result<f64> {
    let mut energies = frame_energies(waveform, frame_len, hop)?;
    if energies.iter().all(|&e| e == 0.0) {
        return Err(Error::Undefined("SNR of an all-zero waveform".into()));
    }
    if energies.len() < 2 {
        return Err(Error::Undefined(
            "SNR needs at least two frames to separate noise from signal".into(),
        ));
    }
    energies.sort_by(f64::total_cmp);
    let k = (energies.len() / 10).max(1);
    let noise = energies[..k].iter().sum::<f64>() / k as f64;
    let signal = energies[k..].iter().sum::<f64>() / (energies.len() - k) as f64;
    if !noise.is_finite() || !signal.is_finite() {
        return Err(Error::Data("waveform contains non-finite samples".into()));
    }
    if noise == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (signal / noise).log10())
}

/// `10·log10(Σ direct² / Σ reverberant²)` over separately known components.
pub fn srr_components(direct: &[f64], reverberant: &[f64]) -> Result<f64> {
    if direct.len() != reverberant.len() {
        return Err(Error::Data(format!(
            "direct ({}) and reverberant ({}) lengths differ",
            direct.len(),
            reverberant.len()
        )));
    }
    let ed: f64 = direct.iter().map(|x| x * x).sum();
    let er: f64 = reverberant.iter().map(|x| x * x).sum();
    if er == 0.0 {
        return Err(Error::Undefined("SRR with zero reverberant energy".into()));
    }
    Ok(10.0 * (ed / er).log10())
}
