//! Helstrom-optimal guessing advantage for the virtual input.

use std::collections::BTreeMap;

use super::records::TranscriptRecord;
use crate::error::{Error, Result};

/// `p_opt − ½ = ½·TD(ψ̄⁰, ψ̄¹)` for the averaged prover views conditioned on `ξ ∈ {0, 1}`.
///
/// Views are block-diagonal in the classical label. A record without a qubit counts
/// as the maximally mixed qubit, which leaves only the label informative. Per label the
/// difference `P(l|0)ρ_{l,0} − P(l|1)ρ_{l,1} = (m₀I + m·σ)/2` has trace norm `max(|m₀|, |m|)`.
pub fn hidden_input_diagnostic(records: &[TranscriptRecord]) -> Result<f64> {
    let mut totals = [0u64; 2];
    // label -> per-ξ (count, Bloch sum)
    let mut blocks: BTreeMap<u32, [(f64, [f64; 3]); 2]> = BTreeMap::new();
    for r in records {
        let xi = r.virtual_x as usize;
        if xi > 1 {
            return Err(Error::InvalidParameter(format!(
                "virtual input {xi} is not binary"
            )));
        }
        totals[xi] += 1;
        let entry = blocks.entry(r.view.label).or_insert([(0.0, [0.0; 3]); 2]);
        entry[xi].0 += 1.0;
        if let Some(b) = r.view.bloch {
            for k in 0..3 {
                entry[xi].1[k] += b.0[k];
            }
        }
    }
    if totals.contains(&0) {
        return Err(Error::InvalidParameter(
            "need records with both virtual inputs".into(),
        ));
    }
    let (n0, n1) = (totals[0] as f64, totals[1] as f64);
    let trace_norm: f64 = blocks
        .values()
        .map(|[(c0, r0), (c1, r1)]| {
            let m0 = c0 / n0 - c1 / n1;
            let m = (0..3)
                .map(|k| (r0[k] / n0 - r1[k] / n1).powi(2))
                .sum::<f64>()
                .sqrt();
            m0.abs().max(m)
        })
        .sum();
    Ok(0.25 * trace_norm)
}
