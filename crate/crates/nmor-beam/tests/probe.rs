//! Temporary exploration harness (deleted before release).

use nmor_beam::cli::{reconstruct_measurement, synthesize_measurement};
use nmor_beam::fit::fit_erf_model_with;
use nmor_beam::imaging::{normalize_map, rotation_from_frames_with, signal_weights, InversionModel};
use nmor_beam::rng::mix;
use nmor_beam::scenario::Scenario;

fn precision_scenario(i0_ua: f64, y0_mm: f64, w_mm: f64, laser: f64) -> Scenario {
    let mut s = Scenario::default();
    s.beam.total_current = i0_ua * 1e-6;
    s.beam.center_y0 = y0_mm * 1e-3;
    s.beam.width_w = w_mm * 1e-3;
    s.laser_peak_intensity = laser;
    s.camera.gain = 125.0 * laser / 30.0;
    s
}

#[test]
fn probe_inmemory_accuracy() {
    let mut worst: (f64, f64, f64) = (0.0, 0.0, 0.0);
    for i0 in [30.0, 70.0, 110.0] {
        for y0 in [-1.0, 0.0, 1.0] {
            for w in [0.5, 1.0, 1.5] {
                let s = precision_scenario(i0, y0, w, 1000.0);
                let m = synthesize_measurement(&s).unwrap();
                let (_, _, fit) =
                    reconstruct_measurement(&m, &s, 0.05, InversionModel::PaperArcsin).unwrap();
                let ei = (fit.current / s.beam.total_current - 1.0).abs();
                let ey = (fit.center_y0 - s.beam.center_y0).abs()
                    / s.beam.center_y0.abs().max(1e-3);
                let ew = (fit.width_w / s.beam.width_w - 1.0).abs();
                worst = (worst.0.max(ei), worst.1.max(ey), worst.2.max(ew));
            }
        }
    }
    println!("27-point worst rel errs: I0 {:.2e} y0 {:.2e} w {:.2e}", worst.0, worst.1, worst.2);
}

#[test]
fn probe_noisy_snr_and_coverage_weighted() {
    // noisy scenario aimed at SNR ~ 5
    let mut base = precision_scenario(50.0, 0.0, 1.0, 10.0);
    base.noise_on = true;
    base.camera.exposure = 30e-6;
    base.camera.gain = 6.0;

    // SNR := max over mask of |Phi| / sigma_Phi(px)
    let m0 = synthesize_measurement(&base).unwrap();
    let grid = base.camera.grid();
    let mut snr_best = 0.0f64;
    for iy in 0..grid.ny {
        for iz in 0..grid.nz {
            let px = grid.idx(iy, iz);
            if !m0.response.beta.mask[px] {
                continue;
            }
            let n = base.camera.mean_electrons(m0.laser.data[px]);
            let var_phi = nmor_beam::imaging::phi_variance(n, base.camera.read_noise);
            let mu0b = 1.25663706212e-6 * m0.response.beta.data[px];
            let snr = (m0.phi_true.data[px] / mu0b).abs() / (var_phi.sqrt() / mu0b);
            snr_best = snr_best.max(snr);
        }
    }
    println!("peak-pixel SNR = {snr_best:.2}");

    let trials = 100;
    let mut cover1 = [0usize; 3];
    let mut cover3 = 0usize;
    let mut fits = Vec::new();
    for t in 0..trials {
        let mut s = base.clone();
        let seed = mix(&[987654321, t as u64]);
        s.seed = seed;
        s.camera.rng_seed = seed;
        let m = synthesize_measurement(&s).unwrap();
        let rot = rotation_from_frames_with(m.on_pair(), m.off_pair(), 0.05, InversionModel::PaperArcsin).unwrap();
        let norm = normalize_map(&rot, &m.response).unwrap();
        let weights = signal_weights(&m.laser, &m.response, &s.camera);
        let fit = fit_erf_model_with(&norm, Some(&weights), None, &s.geometry, &s.fit).unwrap();
        let d = [
            (fit.current - s.beam.total_current, fit.current_err),
            (fit.center_y0 - s.beam.center_y0, fit.center_y0_err),
            (fit.width_w - s.beam.width_w, fit.width_w_err),
        ];
        for (k, (dd, ee)) in d.iter().enumerate() {
            if dd.abs() <= *ee {
                cover1[k] += 1;
            }
        }
        if d.iter().all(|(dd, ee)| dd.abs() <= 3.0 * ee) {
            cover3 += 1;
        }
        fits.push((fit.current, fit.current_err, fit.center_y0, fit.width_w));
    }
    let mean_i0: f64 = fits.iter().map(|f| f.0).sum::<f64>() / trials as f64;
    let std_i0 = (fits.iter().map(|f| (f.0 - mean_i0).powi(2)).sum::<f64>() / (trials - 1) as f64).sqrt();
    let mean_err: f64 = fits.iter().map(|f| f.1).sum::<f64>() / trials as f64;
    println!(
        "I0: empirical std {std_i0:.3e}, mean reported err {mean_err:.3e}, ratio {:.2}",
        mean_err / std_i0
    );
    println!(
        "1-sigma coverage: I0 {}/{trials}, y0 {}/{trials}, w {}/{trials}; all-in-3sigma {}/{trials}",
        cover1[0], cover1[1], cover1[2], cover3
    );
}

#[test]
fn probe_per_pixel_noise_model() {
    use nmor_beam::consts::MU_0;
    let mut base = precision_scenario(50.0, 0.0, 1.0, 10.0);
    base.noise_on = true;
    base.camera.exposure = 30e-6;
    base.camera.gain = 6.0;

    let grid = base.camera.grid();
    let m0 = synthesize_measurement(&base).unwrap();
    // pick pixels: bright center row offset, mid, edge; on the peak-signal row
    let probes = [(62usize, 128usize), (62, 90), (62, 35)];
    let trials = 150;
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); probes.len()];
    for t in 0..trials {
        let mut s = base.clone();
        let seed = mix(&[5555, t as u64]);
        s.seed = seed;
        s.camera.rng_seed = seed;
        let m = synthesize_measurement(&s).unwrap();
        let rot = rotation_from_frames_with(m.on_pair(), m.off_pair(), 0.05, InversionModel::PaperArcsin).unwrap();
        let norm = normalize_map(&rot, &m.response).unwrap();
        for (k, &(iy, iz)) in probes.iter().enumerate() {
            if norm.signal.valid(iy, iz) {
                samples[k].push(norm.signal.at(iy, iz));
            }
        }
    }
    for (k, &(iy, iz)) in probes.iter().enumerate() {
        let px = grid.idx(iy, iz);
        let n = base.camera.mean_electrons(m0.laser.data[px]);
        let var_model = nmor_beam::imaging::phi_variance(n, base.camera.read_noise);
        let mu0b = MU_0 * m0.response.beta.data[px];
        let sigma_model = var_model.sqrt() / mu0b;
        let v = &samples[k];
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt();
        // true noiseless value at this pixel
        let truth = m0.phi_true.data[px] / mu0b;
        println!(
            "px({iy},{iz}) s={:.3}: model sigma {sigma_model:.3e}, empirical {std:.3e}, ratio {:.2}; bias {:.3e} ({:.2} sigma)",
            m0.laser.data[px] / 10.0,
            std / sigma_model,
            mean - truth,
            (mean - truth) / std * (v.len() as f64).sqrt()
        );
    }
}

#[test]
fn probe_weighted_residual_distribution() {
    use nmor_beam::fit::{erf_model, initial_guess};
    let mut s = precision_scenario(50.0, 0.0, 1.0, 10.0);
    s.noise_on = true;
    s.camera.exposure = 30e-6;
    s.camera.gain = 6.0;
    s.seed = 314159;
    s.camera.rng_seed = 314159;

    let m = synthesize_measurement(&s).unwrap();
    let rot = rotation_from_frames_with(m.on_pair(), m.off_pair(), 0.05, InversionModel::PaperArcsin).unwrap();
    let norm = normalize_map(&rot, &m.response).unwrap();
    let weights = signal_weights(&m.laser, &m.response, &s.camera);
    let guess = initial_guess(&norm).unwrap();
    println!("guess: {:?}", guess);

    // weighted residuals against the TRUE parameters
    let grid = norm.signal.grid;
    let mut sum = 0.0;
    let mut n = 0usize;
    let mut worst: Vec<(f64, usize, usize)> = Vec::new();
    let mut by_band = [(0.0f64, 0usize); 5];
    for iy in 0..grid.ny {
        let model = erf_model(grid.y(iy), s.beam.total_current, s.beam.center_y0, s.beam.width_w, s.geometry.cell_path_l);
        for iz in 0..grid.nz {
            let px = grid.idx(iy, iz);
            if !norm.signal.mask[px] || weights.data[px] <= 0.0 {
                continue;
            }
            let wr2 = weights.data[px] * (norm.signal.data[px] - model).powi(2);
            sum += wr2;
            n += 1;
            let band = ((m.laser.data[px] / 10.0) * 4.999) as usize;
            by_band[band].0 += wr2;
            by_band[band].1 += 1;
            if wr2 > 25.0 {
                worst.push((wr2, iy, iz));
            }
        }
    }
    println!("weighted RSS/n against truth: {:.3} over {n} pixels", sum / n as f64);
    for (b, (s_, c)) in by_band.iter().enumerate() {
        if *c > 0 {
            println!("  intensity band {b}: mean w*r^2 = {:.3} ({c} px)", s_ / *c as f64);
        }
    }
    worst.sort_by(|a, b| b.0.total_cmp(&a.0));
    for (wr2, iy, iz) in worst.iter().take(8) {
        println!("  outlier ({iy},{iz}): w*r^2 = {wr2:.1}, s = {:.3}", m.laser.data[grid.idx(*iy,*iz)] / 10.0);
    }
}

#[test]
fn probe_information_accounting() {
    use nmor_beam::fit::{erf_model_jacobian};
    let mut base = precision_scenario(50.0, 0.0, 1.0, 10.0);
    base.noise_on = true;
    base.camera.exposure = 30e-6;
    base.camera.gain = 6.0;

    let m0 = synthesize_measurement(&base).unwrap();
    let weights = signal_weights(&m0.laser, &m0.response, &base.camera);
    let grid = base.camera.grid();

    // manual A = J^T W J at truth over the response mask
    let mut a = [[0.0f64; 3]; 3];
    for iy in 0..grid.ny {
        let jac = erf_model_jacobian(grid.y(iy), base.beam.total_current, base.beam.center_y0, base.beam.width_w, base.geometry.cell_path_l);
        for iz in 0..grid.nz {
            let px = grid.idx(iy, iz);
            if weights.data[px] <= 0.0 { continue; }
            for i in 0..3 { for j in 0..3 { a[i][j] += weights.data[px] * jac[i] * jac[j]; } }
        }
    }
    // invert 3x3 via cofactors
    let det = a[0][0]*(a[1][1]*a[2][2]-a[1][2]*a[2][1]) - a[0][1]*(a[1][0]*a[2][2]-a[1][2]*a[2][0]) + a[0][2]*(a[1][0]*a[2][1]-a[1][1]*a[2][0]);
    let inv00 = (a[1][1]*a[2][2]-a[1][2]*a[2][1])/det;
    println!("manual A00 {:.4e}, inv00 {:.4e}, sqrt {:.4e}", a[0][0], inv00, inv00.sqrt());

    let trials = 100;
    let mut i0s = Vec::new();
    let mut reps = Vec::new();
    let mut sigma2s = Vec::new();
    for t in 0..trials {
        let mut s = base.clone();
        let seed = mix(&[24601, t as u64]);
        s.seed = seed;
        s.camera.rng_seed = seed;
        let m = synthesize_measurement(&s).unwrap();
        let rot = rotation_from_frames_with(m.on_pair(), m.off_pair(), 0.05, InversionModel::PaperArcsin).unwrap();
        let norm = normalize_map(&rot, &m.response).unwrap();
        let fit = fit_erf_model_with(&norm, Some(&weights), None, &s.geometry, &s.fit).unwrap();
        let dof = norm.signal.valid_count() - 3;
        sigma2s.push(fit.residual_norm.powi(2) / dof as f64);
        i0s.push(fit.current);
        reps.push(fit.current_err);
    }
    let mean = i0s.iter().sum::<f64>() / trials as f64;
    let std = (i0s.iter().map(|x| (x-mean).powi(2)).sum::<f64>()/(trials-1) as f64).sqrt();
    println!("empirical std(I0) {std:.4e}; mean reported {:.4e}; mean sigma2 {:.3}", reps.iter().sum::<f64>()/trials as f64, sigma2s.iter().sum::<f64>()/trials as f64);
    println!("bias: mean - truth = {:.3e}", mean - base.beam.total_current);
}

#[test]
fn probe_linear_statistic_variance() {
    let mut base = precision_scenario(50.0, 0.0, 1.0, 10.0);
    base.noise_on = true;
    base.camera.exposure = 30e-6;
    base.camera.gain = 6.0;

    let m0 = synthesize_measurement(&base).unwrap();
    let weights = signal_weights(&m0.laser, &m0.response, &base.camera);
    let grid = base.camera.grid();
    let wsum: f64 = weights.data.iter().sum();

    // restrict to the top rows (y > 2 mm) where the model is flat, to mimic
    // the I0-information region; also a plain unweighted mean over one row
    let mut top_w = 0.0;
    for iy in 0..grid.ny {
        if grid.y(iy) > 2e-3 {
            for iz in 0..grid.nz {
                top_w += weights.data[grid.idx(iy, iz)];
            }
        }
    }

    let trials = 120;
    let mut all = Vec::new();
    let mut top = Vec::new();
    let mut row_uw = Vec::new();
    for t in 0..trials {
        let mut s = base.clone();
        let seed = mix(&[777, t as u64]);
        s.seed = seed;
        s.camera.rng_seed = seed;
        let m = synthesize_measurement(&s).unwrap();
        let rot = rotation_from_frames_with(m.on_pair(), m.off_pair(), 0.05, InversionModel::PaperArcsin).unwrap();
        let norm = normalize_map(&rot, &m.response).unwrap();
        let mut acc_all = 0.0;
        let mut acc_top = 0.0;
        let mut acc_row = (0.0, 0usize);
        for iy in 0..grid.ny {
            for iz in 0..grid.nz {
                let px = grid.idx(iy, iz);
                if !norm.signal.mask[px] || weights.data[px] <= 0.0 { continue; }
                acc_all += weights.data[px] * norm.signal.data[px];
                if grid.y(iy) > 2e-3 { acc_top += weights.data[px] * norm.signal.data[px]; }
                if iy == 62 { acc_row.0 += norm.signal.data[px]; acc_row.1 += 1; }
            }
        }
        all.push(acc_all / wsum);
        top.push(acc_top / top_w);
        row_uw.push(acc_row.0 / acc_row.1 as f64);
    }
    let stats = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (m, (v.iter().map(|x| (x-m).powi(2)).sum::<f64>()/(v.len()-1) as f64).sqrt())
    };
    let (_, s_all) = stats(&all);
    let (_, s_top) = stats(&top);
    let (_, s_row) = stats(&row_uw);
    println!("weighted mean (all): empirical {s_all:.4e}, theory {:.4e}", (1.0/wsum).sqrt());
    println!("weighted mean (top rows): empirical {s_top:.4e}, theory {:.4e}", (1.0/top_w).sqrt());
    // theory for unweighted row mean: sqrt(sum var)/n
    let mut var_sum = 0.0; let mut nn = 0usize;
    for iz in 0..grid.nz {
        let px = grid.idx(62, iz);
        if weights.data[px] > 0.0 { var_sum += 1.0/weights.data[px]; nn += 1; }
    }
    println!("row-62 unweighted mean: empirical {s_row:.4e}, theory {:.4e}", var_sum.sqrt()/nn as f64);
}
