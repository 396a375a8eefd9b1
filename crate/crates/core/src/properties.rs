//! Randomized cross-module properties, checked against independent oracles.

use proptest::prelude::*;

use crate::analysis::{coherent_sine, psd_windowed, sndr, Window};
use crate::dacbank::{
    dwa_schedule, dwa_schedule_multibit, phase_assigned_schedule, render_dt, rz_schedule, ActivationSchedule,
    ElementParams,
};
use crate::harness::{Scenario, KEYS};
use crate::interleave::{demultiplex, polyphase_decompose, serialize, ti_modulate, to_blocks, BlockFilter};
use crate::modulator::{design_loop_filter, modulate, CodeStream, Quantizer, Rate};
use crate::pulseshape::{shape_element, ShapeParams};

fn stream(codes: Vec<u32>, bits: u32) -> CodeStream {
    CodeStream::new(Rate::High, codes, Quantizer::new(bits, 1.0).unwrap()).unwrap()
}

/// `V_S` times the sum of the last `M` bipolar levels; ticks before the start
/// count as idle (-1).
fn moving_sum(y: &[u32], m: usize, v_s: f64) -> Vec<f64> {
    (0..y.len())
        .map(|n| {
            (0..m)
                .map(|k| match n.checked_sub(k) {
                    Some(i) => 2.0 * y[i] as f64 - 1.0,
                    None => -1.0,
                })
                .sum::<f64>()
                * v_s
        })
        .collect()
}

fn convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|n| (0..h.len().min(n + 1)).map(|k| h[k] * x[n - k]).sum())
        .collect()
}

fn paths() -> impl Strategy<Value = usize> {
    prop::sample::select(vec![1usize, 2, 4, 8])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ti_matches_direct_modulator(
        m in paths(),
        order in 1usize..=2,
        blocks in 4usize..64,
        seed in prop::collection::vec(-0.95f64..0.95, 8),
    ) {
        let n = m * blocks;
        let x: Vec<f64> = (0..n).map(|i| seed[i % 8] * (1.0 + (i as f64 * 0.37).sin()) / 2.0).collect();
        let f = design_loop_filter(order, None, 0).unwrap();
        let q = Quantizer::single_bit();
        let ti = ti_modulate(&x, m, &f, &q).unwrap();
        let direct = modulate(&x, &f, &q).unwrap();
        prop_assert_eq!(&ti.multiplexed.codes[m..], &direct.stream.codes[..n - m]);
        prop_assert!(ti.multiplexed.codes[..m].iter().all(|&c| c == q.quantize(0.0)));
        prop_assert_eq!(&ti.errors, &direct.errors);
    }

    #[test]
    fn polyphase_round_trip(h in prop::collection::vec(-2.0f64..2.0, 1..40), m in paths()) {
        let set = polyphase_decompose(&h, m).unwrap();
        let back = set.interleave();
        prop_assert_eq!(&back[..h.len()], &h[..]);
        prop_assert!(back[h.len()..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn block_filter_is_convolution(
        h in prop::collection::vec(-2.0f64..2.0, 1..24),
        m in paths(),
        nb in 1usize..12,
        xs in prop::collection::vec(-1.0f64..1.0, 96),
    ) {
        let x = &xs[..nb * m];
        let bf = BlockFilter::new(&polyphase_decompose(&h, m).unwrap());
        let out = serialize(&bf.apply(&to_blocks(x, m)).unwrap());
        prop_assert_eq!(out, convolve(x, &h));
    }

    #[test]
    fn dem_is_transparent(codes in prop::collection::vec(0u32..=1, 16..400), m in paths()) {
        let len = codes.len() / m * m;
        let y = stream(codes[..len].to_vec(), 1);
        let oracle = moving_sum(&y.codes, m, 1.0);
        let ideal = |s: &ActivationSchedule| render_dt(s, &vec![ElementParams::IDEAL; s.elements()], 1.0).unwrap();
        let phase = ideal(&phase_assigned_schedule(&demultiplex(&y, m)).unwrap());
        let dwa = ideal(&dwa_schedule(&y, m, m).unwrap());
        let rz = ideal(&rz_schedule(&y, m).unwrap());
        prop_assert_eq!(&phase, &oracle);
        prop_assert_eq!(&dwa, &oracle);
        let shifted: Vec<f64> = oracle.iter().map(|v| v - 1.0).collect();
        prop_assert_eq!(rz, shifted);
    }

    #[test]
    fn multibit_dem_is_transparent(codes in prop::collection::vec(0u32..=7, 16..300), m in prop::sample::select(vec![2usize, 4])) {
        let len = codes.len() / m * m;
        let y = stream(codes[..len].to_vec(), 3);
        let ideal = |s: &ActivationSchedule| render_dt(s, &vec![ElementParams::IDEAL; s.elements()], 1.0).unwrap();
        let phase = ideal(&phase_assigned_schedule(&demultiplex(&y, m)).unwrap());
        let dwa = ideal(&dwa_schedule_multibit(&y, m).unwrap());
        for n in 0..len {
            let want: f64 = (0..m)
                .map(|k| n.checked_sub(k).map_or(-1.0, |i| y.quantizer.level(y.codes[i])))
                .sum();
            prop_assert!((phase[n] - want).abs() < 1e-12);
            prop_assert!((dwa[n] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_uses_elements_evenly(codes in prop::collection::vec(0u32..=7, 1..500), m in paths()) {
        let y1 = stream(codes.iter().map(|c| c & 1).collect(), 1);
        let s = dwa_schedule(&y1, m, m).unwrap();
        let t = s.trigger_counts();
        prop_assert!(t.iter().max().unwrap() - t.iter().min().unwrap() <= 1);
        let y3 = stream(codes.clone(), 3);
        let s = dwa_schedule_multibit(&y3, m).unwrap();
        let t = s.trigger_counts();
        prop_assert!(t.iter().max().unwrap() - t.iter().min().unwrap() <= 1);
        s.validate().unwrap();
    }

    #[test]
    fn shaped_waveform_is_continuous_and_settles_monotonically(
        levels in prop::collection::vec(prop::sample::select(vec![-1.0f64, 1.0, 0.3]), 2..40),
        tau_p in 0.05f64..1.0,
        tau_n in 0.05f64..1.0,
        vo_p in 0.2f64..3.0,
        vo_n in 0.2f64..3.0,
    ) {
        let sp = ShapeParams { tau_p, tau_n, sr_p: vo_p / tau_p, sr_n: vo_n / tau_n };
        let k = 16;
        let w = shape_element(&levels, &sp, 1.0, k).unwrap();
        let max_step = sp.sr_p.max(sp.sr_n) / k as f64 + 1e-12;
        let mut prev = levels[0];
        for (n, &target) in levels.iter().enumerate() {
            let mut gap = (prev - target).abs();
            for &v in &w.samples[n * k..(n + 1) * k] {
                prop_assert!((v - prev).abs() <= max_step);
                let g = (v - target).abs();
                prop_assert!(g <= gap + 1e-12);
                prop_assert!((v - target).signum() * (prev - target).signum() >= 0.0 || g < 1e-12);
                gap = g;
                prev = v;
            }
        }
    }

    #[test]
    fn sndr_ignores_scale_and_dc(scale in 0.01f64..100.0, dc in -1.0f64..1.0) {
        let n = 4096;
        let f = design_loop_filter(2, None, 0).unwrap();
        let x = coherent_sine(n, 0.5, 13, n);
        let y = modulate(&x, &f, &Quantizer::single_bit()).unwrap().stream.levels();
        let base = psd_windowed(&y, 1.0, n, 1.0, Window::Hann).unwrap();
        let s0 = sndr(&base, base.freq_of(13), 16.0).unwrap();
        let z: Vec<f64> = y.iter().map(|v| scale * v + dc).collect();
        let r = psd_windowed(&z, 1.0, n, scale, Window::Hann).unwrap();
        let s1 = sndr(&r, r.freq_of(13), 16.0).unwrap();
        prop_assert!((s0 - s1).abs() < 1e-6, "{s0} vs {s1}");
    }

    #[test]
    fn scenario_canonical_round_trip(
        seed in any::<u64>(),
        osr in 2.0f64..512.0,
        amp in -120.0f64..0.0,
        gains in prop::collection::vec(0.5f64..1.5, 4),
        range in prop::option::of(0.0f64..0.2),
        mode in prop::sample::select(vec!["phase", "dwa", "rz"]),
    ) {
        let gains: Vec<String> = gains.iter().map(f64::to_string).collect();
        let text = format!(
            "[run]\nseed = {seed}\n[modulator]\nosr = {osr}\n[input]\namplitude_dbfs = {amp}\n\
             [case a]\nmismatch.gains = {}\n[case b]\ndac.mode = {mode}\nmismatch.gain_range = {}\n",
            gains.join(","),
            range.map(|r| r.to_string()).unwrap_or_default(),
        );
        let s = Scenario::parse(&text, "p").unwrap();
        let canon = s.canonical();
        let again = Scenario::parse(&canon, "q").unwrap();
        prop_assert_eq!(again.configs().unwrap(), s.configs().unwrap());
        prop_assert!(canon.lines().filter(|l| l.contains(" =")).count() >= KEYS.len());
        prop_assert_eq!(again.canonical(), canon);
    }
}

#[test]
fn rz_pulses_are_identical_when_edges_settle_in_one_tick() {
    // 5 % split between directions, both edges settle far inside one tick
    let sp = ShapeParams {
        tau_p: 0.05,
        tau_n: 0.0525,
        sr_p: 15.0,
        sr_n: 14.25,
    };
    let codes: Vec<u32> = (0..2000u32).map(|i| u32::from((i * 7919 + i / 3) % 5 < 3)).collect();
    let s = rz_schedule(&stream(codes, 1), 4).unwrap();
    let k = 16;
    let params = ElementParams {
        gain: 1.0,
        offset: 0.0,
        tau_p: sp.tau_p,
        tau_n: sp.tau_n,
        sr_p: sp.sr_p,
        sr_n: sp.sr_n,
    };
    for e in 0..s.elements() {
        let levels = crate::dacbank::element_levels(&s, e, &params, 1.0);
        let w = shape_element(&levels, &sp, 1.0, k).unwrap();
        let pulse = |t: usize| &w.samples[t * k..(t + 5) * k];
        let starts: Vec<usize> = s.starts[e].iter().copied().filter(|&t| t >= 1 && t + 5 <= s.ticks).collect();
        let first = pulse(starts[0]);
        for &t in &starts[1..] {
            for (a, b) in pulse(t).iter().zip(first) {
                assert!((a - b).abs() < 1e-6, "element {e} pulse at tick {t}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn modulator_reconstruction_identity(
        order in 1usize..=2,
        bits in 1u32..=4,
        xs in prop::collection::vec(-0.9f64..0.9, 1..300),
    ) {
        let f = design_loop_filter(order, None, 0).unwrap();
        let q = Quantizer::new(bits, 1.0).unwrap();
        let out = modulate(&xs, &f, &q).unwrap();
        let again = modulate(&xs, &f, &q).unwrap();
        prop_assert_eq!(&out, &again);
        let h = f.impulse();
        for n in 0..xs.len() {
            let fb: f64 = (1..h.len().min(n + 1)).map(|k| h[k] * out.errors[n - k]).sum();
            let lhs = q.level(out.stream.codes[n]) - out.errors[n] - fb;
            prop_assert!((lhs - xs[n]).abs() < 1e-12, "tick {n}: {lhs} vs {}", xs[n]);
        }
        if bits == 1 {
            prop_assert!(out.stream.levels().iter().all(|&v| v == 1.0 || v == -1.0));
        }
    }
}

#[test]
fn zero_input_noise_shaping_slope() {
    use crate::analysis::inband_slope;
    use crate::modulator::{modulate_dithered, Dither};
    let n = 1 << 15;
    let x = vec![0.0; n];
    for (order, expect) in [(1usize, 20.0), (2, 40.0)] {
        let f = design_loop_filter(order, None, 0).unwrap();
        let dither = Dither {
            amplitude: 0.5,
            seed: 11,
        };
        let y = modulate_dithered(&x, &f, &Quantizer::single_bit(), Some(dither))
            .unwrap()
            .stream
            .levels();
        let r = psd_windowed(&y, 1.0, n, 1.0, Window::Hann).unwrap();
        let slope = inband_slope(&r, 1e-3, 1e-2, &[]).unwrap();
        assert!((slope - expect).abs() <= 5.0, "L={order}: slope {slope}");
    }
}

#[test]
fn all_ones_use_every_element_equally() {
    for m in [1usize, 2, 4, 8] {
        let rounds = 3;
        let e_single = m;
        let y = stream(vec![1; e_single * m * rounds], 1);
        let t = dwa_schedule(&y, m, m).unwrap().trigger_counts();
        assert!(t.iter().all(|&c| c == t[0]), "dwa M={m}: {t:?}");
        let e_rz = m + 1;
        let y = stream(vec![1; e_rz * m * rounds], 1);
        let t = rz_schedule(&y, m).unwrap().trigger_counts();
        assert!(t.iter().all(|&c| c == t[0]), "rz M={m}: {t:?}");
        let e_multi = m * 7;
        let y = stream(vec![7; e_multi * m * rounds], 3);
        let s = dwa_schedule_multibit(&y, m).unwrap();
        s.validate().unwrap();
        let t = s.trigger_counts();
        assert!(t.iter().all(|&c| c == t[0]), "multibit M={m}: {t:?}");
    }
}

#[test]
fn ideal_analog_render_matches_discrete() {
    use crate::pulseshape::render_analog;
    let codes: Vec<u32> = (0..400u32).map(|i| i.wrapping_mul(2654435761) >> 31).collect();
    let y = stream(codes, 1);
    let s = dwa_schedule(&y, 4, 4).unwrap();
    let params = [
        ElementParams::with_gain_offset(1.02, 0.01),
        ElementParams::with_gain_offset(0.97, -0.02),
        ElementParams::with_gain_offset(1.0, 0.0),
        ElementParams::with_gain_offset(1.05, 0.03),
    ];
    let dt = render_dt(&s, &params, 1.0).unwrap();
    let wave = render_analog(&s, &params, 1.0, 1.0, 8).unwrap();
    assert_eq!(wave.samples.len(), 8 * dt.len());
    assert_eq!(wave.at_tick_ends(), dt);
}

#[test]
fn nrz_waveform_depends_on_neighbours() {
    // one isolated one versus the middle of three consecutive ones
    let sp = ShapeParams::symmetric(0.5, 1.5);
    let k = 16;
    let isolated = shape_element(&[-1.0, -1.0, 1.0, -1.0, -1.0], &sp, 1.0, k).unwrap();
    let run = shape_element(&[-1.0, 1.0, 1.0, 1.0, -1.0], &sp, 1.0, k).unwrap();
    let area = |w: &[f64]| w.iter().sum::<f64>() / k as f64;
    let a = area(&isolated.samples[2 * k..3 * k]);
    let b = area(&run.samples[2 * k..3 * k]);
    assert!((a - b).abs() > 0.1, "{a} vs {b}");
}

#[test]
fn rotation_does_not_change_ideal_dynamic_range() {
    let text = "[mismatch]\n[input]\nbin = 13\n[analysis]\nsamples = 8192\nsweep = -60, -30, -6\n\
                [case phase]\n[case dwa]\ndac.mode = dwa\n[case rz]\ndac.mode = rz\n";
    let s = Scenario::parse(text, "t").unwrap();
    let (amps, curves) = crate::harness::sweep_curves(&s).unwrap();
    assert_eq!(amps.len(), 3);
    for i in 0..amps.len() {
        for c in &curves[1..] {
            assert!((c.1[i] - curves[0].1[i]).abs() < 0.1, "{} at {}: {} vs {}", c.0, amps[i], c.1[i], curves[0].1[i]);
        }
    }
}
