//! Coincidence counting and the estimators applied to time-tag streams.

use super::{TimeTag, TimeTagStream};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueWithSigma {
    pub value: f64,
    /// Poisson error propagated first-order from √N on the raw counts.
    pub sigma: f64,
}

/// Counts in one detection channel.
pub fn count_singles(stream: &TimeTagStream, channel: u8) -> u64 {
    stream
        .events()
        .iter()
        .filter(|e| e.channel == channel)
        .count() as u64
}

/// All (a, b) pairs with |t_b − t_a| ≤ window/2.
pub fn count_coincidences(stream: &TimeTagStream, ch_a: u8, ch_b: u8, window_ps: u64) -> u64 {
    let a = stream.channel_timestamps(ch_a);
    let b = stream.channel_timestamps(ch_b);
    let half = window_ps / 2;
    let mut lo = 0usize;
    let mut hi = 0usize;
    let mut count = 0u64;
    for &ta in &a {
        let t_lo = ta.saturating_sub(half);
        let t_hi = ta + half;
        while lo < b.len() && b[lo] < t_lo {
            lo += 1;
        }
        if hi < lo {
            hi = lo;
        }
        while hi < b.len() && b[hi] <= t_hi {
            hi += 1;
        }
        count += (hi - lo) as u64;
    }
    count
}

/// Triples: for each event on `ch_s`, the product of i₁ and i₂ counts inside
/// its window (all combinations, matching the pairwise convention).
pub fn count_triples(
    stream: &TimeTagStream,
    ch_s: u8,
    ch_i1: u8,
    ch_i2: u8,
    window_ps: u64,
) -> u64 {
    let s = stream.channel_timestamps(ch_s);
    let b1 = stream.channel_timestamps(ch_i1);
    let b2 = stream.channel_timestamps(ch_i2);
    let half = window_ps / 2;
    let (mut lo1, mut hi1, mut lo2, mut hi2) = (0usize, 0usize, 0usize, 0usize);
    let mut count = 0u64;
    for &ts in &s {
        let t_lo = ts.saturating_sub(half);
        let t_hi = ts + half;
        while lo1 < b1.len() && b1[lo1] < t_lo {
            lo1 += 1;
        }
        if hi1 < lo1 {
            hi1 = lo1;
        }
        while hi1 < b1.len() && b1[hi1] <= t_hi {
            hi1 += 1;
        }
        while lo2 < b2.len() && b2[lo2] < t_lo {
            lo2 += 1;
        }
        if hi2 < lo2 {
            hi2 = lo2;
        }
        while hi2 < b2.len() && b2[hi2] <= t_hi {
            hi2 += 1;
        }
        count += ((hi1 - lo1) * (hi2 - lo2)) as u64;
    }
    count
}

/// Normalized cross-correlation histogram g²_si(t) = C_si(t)/C_si(∞).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorrelationHistogram {
    pub bin_ps: u64,
    pub span_ps: u64,
    /// Bin-center delays, ps (t_b − t_a).
    pub delays_ps: Vec<i64>,
    pub counts: Vec<u64>,
    /// counts / far-delay mean; empty when the far region is empty.
    pub g2: Vec<f64>,
    /// Mean counts of the bins with |t| ≥ 0.8·span.
    pub far_delay_mean: f64,
    pub far_delay_total: u64,
    /// Set when the normalization region holds fewer than 100 counts; the raw
    /// histogram is still returned.
    pub insufficient_far_delay_statistics: bool,
}

/// Histogram of arrival-time differences t_b − t_a over [−span, +span] with
/// zero-centered bins, normalized by the mean of the |t| ≥ 0.8·span bins.
/// Single pass over the sorted streams with a sliding window.
pub fn coincidence_histogram(
    stream: &TimeTagStream,
    ch_a: u8,
    ch_b: u8,
    bin_ps: u64,
    span_ps: u64,
) -> Result<CorrelationHistogram> {
    if bin_ps == 0 || span_ps < 50 * bin_ps {
        return Err(Error::InvalidSpec(format!(
            "need span >= 50 x bin for far-delay normalization (bin {bin_ps}, span {span_ps})"
        )));
    }
    let a = stream.channel_timestamps(ch_a);
    let b = stream.channel_timestamps(ch_b);
    let half_bins = (span_ps / bin_ps) as i64;
    let nbins = (2 * half_bins + 1) as usize;
    let mut counts = vec![0u64; nbins];
    let span = span_ps as i64;
    let (mut lo, mut hi) = (0usize, 0usize);
    for &ta in &a {
        let t_lo = ta.saturating_sub(span_ps);
        let t_hi = ta + span_ps;
        while lo < b.len() && b[lo] < t_lo {
            lo += 1;
        }
        if hi < lo {
            hi = lo;
        }
        while hi < b.len() && b[hi] <= t_hi {
            hi += 1;
        }
        for &tb in &b[lo..hi] {
            let dt = tb as i64 - ta as i64;
            if dt.abs() <= span {
                let k = (dt as f64 / bin_ps as f64).round() as i64 + half_bins;
                if (0..nbins as i64).contains(&k) {
                    counts[k as usize] += 1;
                }
            }
        }
    }
    let delays_ps: Vec<i64> = (0..nbins)
        .map(|k| (k as i64 - half_bins) * bin_ps as i64)
        .collect();
    let far_threshold = (0.8 * span_ps as f64) as i64;
    let far: Vec<usize> = (0..nbins)
        .filter(|&k| delays_ps[k].abs() >= far_threshold)
        .collect();
    let far_delay_total: u64 = far.iter().map(|&k| counts[k]).sum();
    let far_delay_mean = if far.is_empty() {
        0.0
    } else {
        far_delay_total as f64 / far.len() as f64
    };
    let g2 = if far_delay_mean > 0.0 {
        counts.iter().map(|&c| c as f64 / far_delay_mean).collect()
    } else {
        Vec::new()
    };
    Ok(CorrelationHistogram {
        bin_ps,
        span_ps,
        delays_ps,
        counts,
        g2,
        far_delay_mean,
        far_delay_total,
        insufficient_far_delay_statistics: far_delay_total < 100,
    })
}

/// PGR estimator C_i·C_s/(2·C_si); the factor 2 accounts for the 50:50
/// splitter separating the degenerate pair.
pub fn estimate_pgr(
    singles_s: u64,
    singles_i: u64,
    coincidences: u64,
    duration_s: f64,
) -> Result<ValueWithSigma> {
    if coincidences == 0 {
        return Err(Error::ZeroCoincidence);
    }
    let value =
        singles_s as f64 * singles_i as f64 / (2.0 * coincidences as f64) / duration_s;
    let rel = inv_or_zero(singles_s) + inv_or_zero(singles_i) + inv_or_zero(coincidences);
    Ok(ValueWithSigma {
        value,
        sigma: value * rel.sqrt(),
    })
}

fn inv_or_zero(n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        1.0 / n as f64
    }
}

/// CAR = max g²_si(t) − 1.
pub fn compute_car(histogram: &CorrelationHistogram) -> ValueWithSigma {
    if histogram.g2.is_empty() {
        return ValueWithSigma {
            value: 0.0,
            sigma: 0.0,
        };
    }
    let mut peak = 0usize;
    for (k, &g) in histogram.g2.iter().enumerate() {
        if g > histogram.g2[peak] {
            peak = k;
        }
    }
    let g_peak = histogram.g2[peak];
    let n_peak = histogram.counts[peak];
    let rel = inv_or_zero(n_peak) + inv_or_zero(histogram.far_delay_total);
    ValueWithSigma {
        value: g_peak - 1.0,
        sigma: g_peak * rel.sqrt(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeraldedG2 {
    /// C_si₁i₂·C_s / (2·C_si₁·C_si₂), the device paper's convention.
    pub paper: ValueWithSigma,
    /// C_si₁i₂·C_s / (C_si₁·C_si₂): the correlation-function normalization
    /// (→ 1 for uncorrelated light).
    pub conventional: ValueWithSigma,
    /// Raw heralded rate C_si₁ + C_si₂, Hz.
    pub heralded_rate_hz: ValueWithSigma,
}

/// Heralded autocorrelation at zero delay from raw counts.
pub fn heralded_g2(
    singles_s: u64,
    coinc_si1: u64,
    coinc_si2: u64,
    triples: u64,
    duration_s: f64,
) -> Result<HeraldedG2> {
    if coinc_si1 == 0 || coinc_si2 == 0 {
        return Err(Error::ZeroHeraldedCoincidence);
    }
    let conv = triples as f64 * singles_s as f64 / (coinc_si1 as f64 * coinc_si2 as f64);
    let rel = inv_or_zero(triples.max(1))
        + inv_or_zero(singles_s)
        + inv_or_zero(coinc_si1)
        + inv_or_zero(coinc_si2);
    // for zero triples, quote the one-count scale as the uncertainty
    let scale = if triples == 0 {
        singles_s as f64 / (coinc_si1 as f64 * coinc_si2 as f64)
    } else {
        conv * rel.sqrt()
    };
    let heralded = (coinc_si1 + coinc_si2) as f64 / duration_s;
    Ok(HeraldedG2 {
        paper: ValueWithSigma {
            value: conv / 2.0,
            sigma: scale / 2.0,
        },
        conventional: ValueWithSigma {
            value: conv,
            sigma: scale,
        },
        heralded_rate_hz: ValueWithSigma {
            value: heralded,
            sigma: ((coinc_si1 + coinc_si2) as f64).sqrt() / duration_s,
        },
    })
}

/// Full analysis of a stream: singles, pairwise/triple coincidences and the
/// derived estimators. Two-detector streams yield PGR and CAR; three-detector
/// streams additionally yield the heralded g²(0) (with the idler channels
/// merged for PGR/CAR).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoincidenceReport {
    pub duration_s: f64,
    pub singles_hz: Vec<ValueWithSigma>,
    /// (channel a, channel b, rate).
    pub pair_coincidences_hz: Vec<(u8, u8, ValueWithSigma)>,
    pub triple_coincidences_hz: Option<ValueWithSigma>,
    pub pgr: Option<ValueWithSigma>,
    pub car: Option<ValueWithSigma>,
    pub g2_heralded: Option<HeraldedG2>,
    pub heralded_rate_hz: Option<ValueWithSigma>,
}

pub fn analyze(
    stream: &TimeTagStream,
    window_ps: u64,
    bin_ps: u64,
    span_ps: u64,
) -> Result<CoincidenceReport> {
    let t = stream.duration_s;
    let nch = stream.channel_count() as u8;
    let singles: Vec<u64> = (0..nch).map(|c| count_singles(stream, c)).collect();
    let singles_hz = singles
        .iter()
        .map(|&n| ValueWithSigma {
            value: n as f64 / t,
            sigma: (n as f64).sqrt() / t,
        })
        .collect();
    let mut pair_coincidences_hz = Vec::new();
    let mut pair_counts = std::collections::BTreeMap::new();
    for a in 0..nch {
        for b in (a + 1)..nch {
            let n = count_coincidences(stream, a, b, window_ps);
            pair_counts.insert((a, b), n);
            pair_coincidences_hz.push((
                a,
                b,
                ValueWithSigma {
                    value: n as f64 / t,
                    sigma: (n as f64).sqrt() / t,
                },
            ));
        }
    }
    match nch {
        2 => {
            let hist = coincidence_histogram(stream, 0, 1, bin_ps, span_ps)?;
            let car = compute_car(&hist);
            let pgr = estimate_pgr(singles[0], singles[1], pair_counts[&(0, 1)], t).ok();
            Ok(CoincidenceReport {
                duration_s: t,
                singles_hz,
                pair_coincidences_hz,
                triple_coincidences_hz: None,
                pgr,
                car: Some(car),
                g2_heralded: None,
                heralded_rate_hz: None,
            })
        }
        3 => {
            let triples = count_triples(stream, 0, 1, 2, window_ps);
            let g2h = heralded_g2(
                singles[0],
                pair_counts[&(0, 1)],
                pair_counts[&(0, 2)],
                triples,
                t,
            )
            .ok();
            // merge the idler splitter ports for the PGR/CAR view
            let merged: Vec<TimeTag> = stream
                .events()
                .iter()
                .map(|e| TimeTag {
                    timestamp_ps: e.timestamp_ps,
                    channel: if e.channel == 2 { 1 } else { e.channel },
                })
                .collect();
            let merged = TimeTagStream::new(merged, t, vec!["s".into(), "i".into()])?;
            let n_si = count_coincidences(&merged, 0, 1, window_ps);
            let hist = coincidence_histogram(&merged, 0, 1, bin_ps, span_ps)?;
            let car = compute_car(&hist);
            let pgr =
                estimate_pgr(singles[0], singles[1] + singles[2], n_si, t).ok();
            Ok(CoincidenceReport {
                duration_s: t,
                singles_hz,
                pair_coincidences_hz,
                triple_coincidences_hz: Some(ValueWithSigma {
                    value: triples as f64 / t,
                    sigma: (triples as f64).sqrt() / t,
                }),
                pgr,
                car: Some(car),
                g2_heralded: g2h.clone(),
                heralded_rate_hz: g2h.map(|g| g.heralded_rate_hz),
            })
        }
        n => Err(Error::InvalidSpec(format!(
            "analysis supports 2 or 3 channels, stream has {n}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(events: Vec<(u64, u8)>, nch: usize, duration: f64) -> TimeTagStream {
        let mut evs: Vec<TimeTag> = events
            .into_iter()
            .map(|(t, c)| TimeTag {
                timestamp_ps: t,
                channel: c,
            })
            .collect();
        evs.sort_unstable();
        TimeTagStream::new(
            evs,
            duration,
            (0..nch).map(|i| format!("ch{i}")).collect(),
        )
        .unwrap()
    }

    #[test]
    fn pgr_estimator_arithmetic() {
        // 1000 Hz, 1000 Hz, 50 Hz over 1 s -> 10 kHz
        let v = estimate_pgr(1000, 1000, 50, 1.0).unwrap();
        assert_eq!(v.value, 10_000.0);
        assert!(v.sigma > 0.0);
        assert!(matches!(
            estimate_pgr(10, 10, 0, 1.0),
            Err(Error::ZeroCoincidence)
        ));
    }

    #[test]
    fn coincidence_counting_window_edges() {
        let s = stream(
            vec![(1000, 0), (1400, 1), (1501, 1), (10_000, 1)],
            2,
            1e-6,
        );
        // window 1000 ps -> half window 500: 1400 and 1500 would count; 1501 is out
        assert_eq!(count_coincidences(&s, 0, 1, 1000), 1);
        assert_eq!(count_coincidences(&s, 0, 1, 1002), 2);
    }

    #[test]
    fn triple_counting_combinations() {
        let s = stream(
            vec![(1000, 0), (900, 1), (1100, 1), (1050, 2)],
            3,
            1e-6,
        );
        // both i1 events and the single i2 event are inside the 1 ns window
        assert_eq!(count_triples(&s, 0, 1, 2, 1000), 2);
    }

    #[test]
    fn histogram_requires_far_delay_room() {
        let s = stream(vec![(0, 0), (10, 1)], 2, 1e-9);
        assert!(coincidence_histogram(&s, 0, 1, 100, 1000).is_err());
        assert!(coincidence_histogram(&s, 0, 1, 100, 5000).is_ok());
    }

    #[test]
    fn zero_jitter_pairs_land_in_central_bin() {
        let spec = crate::photon_stats::SourceDetectionSpec {
            pair_rate_hz: 2.0e5,
            duration_s: 0.2,
            channel_efficiencies: vec![1.0, 1.0],
            dark_rates_hz: vec![0.0, 0.0],
            timing_jitter_sigma_ps: vec![0.0, 0.0],
            rng_seed: 11,
            ..Default::default()
        };
        let s = crate::photon_stats::simulate_timetags(&spec).unwrap();
        let h = coincidence_histogram(&s, 0, 1, 100, 5000).unwrap();
        let center = h.delays_ps.iter().position(|&d| d == 0).unwrap();
        let true_pairs: u64 = h.counts[center];
        let elsewhere: u64 = h.counts.iter().sum::<u64>() - true_pairs;
        // accidentals at this rate over ±5 ns are a tiny fraction
        assert!(true_pairs > 100);
        assert!((elsewhere as f64) < 0.05 * true_pairs as f64);
    }

    #[test]
    fn car_of_flat_histogram_is_zero() {
        let h = CorrelationHistogram {
            bin_ps: 100,
            span_ps: 5000,
            delays_ps: (-50..=50).map(|k| k * 100).collect(),
            counts: vec![400; 101],
            g2: vec![1.0; 101],
            far_delay_mean: 400.0,
            far_delay_total: 400 * 22,
            insufficient_far_delay_statistics: false,
        };
        assert_eq!(compute_car(&h).value, 0.0);
        let mut peaked = h.clone();
        peaked.g2[50] = 3.0;
        assert_eq!(compute_car(&peaked).value, 2.0);
    }

    #[test]
    fn heralded_g2_zero_triples() {
        let g = heralded_g2(10_000, 500, 480, 0, 1.0).unwrap();
        assert_eq!(g.paper.value, 0.0);
        assert_eq!(g.conventional.value, 0.0);
        assert!(g.paper.sigma > 0.0);
        assert_eq!(g.heralded_rate_hz.value, 980.0);
        assert!(matches!(
            heralded_g2(10, 0, 5, 0, 1.0),
            Err(Error::ZeroHeraldedCoincidence)
        ));
    }

    #[test]
    fn uncorrelated_light_adjudicates_the_factor_of_two() {
        // independent Poisson streams on all three detectors: the
        // conventional estimator must read 1, the paper's convention 1/2
        let spec = crate::photon_stats::SourceDetectionSpec {
            pair_rate_hz: 0.0,
            duration_s: 20.0,
            channel_efficiencies: vec![1.0, 1.0, 1.0],
            dark_rates_hz: vec![200_000.0, 120_000.0, 110_000.0],
            timing_jitter_sigma_ps: vec![0.0; 3],
            splitter_layout: crate::photon_stats::SplitterLayout::ThreeDetector,
            rng_seed: 3,
            ..Default::default()
        };
        let s = crate::photon_stats::simulate_timetags(&spec).unwrap();
        let report = analyze(&s, 1000, 100, 5000).unwrap();
        let g = report.g2_heralded.unwrap();
        assert!(
            (g.conventional.value - 1.0).abs() < 5.0 * g.conventional.sigma,
            "conventional g2 = {} ± {}",
            g.conventional.value,
            g.conventional.sigma
        );
        assert!((g.paper.value - 0.5).abs() < 5.0 * g.paper.sigma);
    }

    #[test]
    fn accidental_only_histogram_is_flat() {
        let spec = crate::photon_stats::SourceDetectionSpec {
            pair_rate_hz: 0.0,
            duration_s: 50.0,
            channel_efficiencies: vec![1.0, 1.0],
            dark_rates_hz: vec![200_000.0, 200_000.0],
            timing_jitter_sigma_ps: vec![0.0, 0.0],
            rng_seed: 5,
            ..Default::default()
        };
        let s = crate::photon_stats::simulate_timetags(&spec).unwrap();
        let h = coincidence_histogram(&s, 0, 1, 100, 5000).unwrap();
        assert!(!h.insufficient_far_delay_statistics);
        let mean: f64 =
            h.counts.iter().map(|&c| c as f64).sum::<f64>() / h.counts.len() as f64;
        let max = *h.counts.iter().max().unwrap() as f64;
        assert!(max <= mean + 5.0 * mean.sqrt(), "max {max}, mean {mean}");
        // g2 ≈ 1 everywhere within 5 sigma
        for (k, &g) in h.g2.iter().enumerate() {
            let sigma = (inv_or_zero(h.counts[k].max(1)) + inv_or_zero(h.far_delay_total)).sqrt();
            assert!((g - 1.0).abs() < 5.0 * sigma.max(0.05), "bin {k}: g2 = {g}");
        }
    }
}
