// scratch harness for numeric exploration of the acceptance regimes
use se3ppf::filters::FilterMode;
use se3ppf::sim::{run_scenario, FilterSelection, ScenarioConfig};

fn lyapunov_max_increase(series: &[se3ppf::sim::SeriesRecord]) -> (f64, f64) {
    let mut max_inc = f64::NEG_INFINITY;
    let mut at = 0.0;
    for w in series.windows(2) {
        let inc = w[1].lyapunov - w[0].lyapunov;
        if inc > max_inc {
            max_inc = inc;
            at = w[1].t;
        }
    }
    (max_inc, at)
}

fn report(cfg: &ScenarioConfig, label: &str) {
    let t0 = std::time::Instant::now();
    let report = run_scenario(cfg).expect("run");
    let dt = t0.elapsed();
    for r in &report.results {
        let s = &r.summary;
        let (max_inc, at) = lyapunov_max_increase(&r.series);
        println!(
            "[{label}] {:10} {:10} outcome={:?} viol={} true_viol={} mean|R|_I[5,30]={:.3e} final_true=[{:.3e},{:.3e},{:.3e},{:.3e}] maxdV={:.3e}@{:.2} bufinal=({:.3},{:.3},{:.3})/({:.3},{:.3},{:.3}) elapsed={dt:?}",
            r.mode.tag(),
            r.form.tag(),
            r.outcome,
            s.total_violations,
            s.total_true_violations,
            s.mean_attitude_distance,
            s.final_true_errors[0],
            s.final_true_errors[1],
            s.final_true_errors[2],
            s.final_true_errors[3],
            max_inc,
            at,
            s.final_bias_omega[0],
            s.final_bias_omega[1],
            s.final_bias_omega[2],
            s.final_bias_v[0],
            s.final_bias_v[1],
            s.final_bias_v[2],
        );
        let ratios: Vec<f64> = s.channels.iter().map(|c| c.max_ratio).collect();
        println!("      max |e|/xi per channel: {ratios:.3?}");
    }
    let _ = FilterMode::SemiDirect;
}

fn main() {
    let base = ScenarioConfig::paper_sv();

    // 1. noise off, all printed biases on
    let mut cfg = base.clone();
    cfg.noise = false;
    cfg.filter = FilterSelection::Both;
    report(&cfg, "noisefree-allbias");

    // 2. theorem regime: noise off, vector biases zeroed, velocity biases on
    let mut cfg = base.clone();
    cfg.noise = false;
    cfg.filter = FilterSelection::Both;
    for rv in &mut cfg.sensors.reference_vectors {
        rv.bias = se3ppf::liegroup::Vec3::zeros();
    }
    for lm in &mut cfg.sensors.landmarks {
        lm.bias = se3ppf::liegroup::Vec3::zeros();
    }
    report(&cfg, "theorem-regime");

    // 3. noisy, seed 42
    let mut cfg = base.clone();
    cfg.noise = true;
    cfg.filter = FilterSelection::Both;
    report(&cfg, "noisy-42");

    // 4. cross-form: clean 5 s, matrix vs quaternion
    let mut m = base.clone();
    m.noise = false;
    m.duration = 5.0;
    m.filter = FilterSelection::Both;
    let q = {
        let mut q = m.clone();
        q.form = se3ppf::filters::RotationForm::Quaternion;
        q
    };
    let rm = run_scenario(&m).expect("matrix run");
    let rq = run_scenario(&q).expect("quat run");
    for (a, b) in rm.results.iter().zip(rq.results.iter()) {
        let mut max_div = 0.0f64;
        for (ra, rb) in a.series.iter().zip(b.series.iter()) {
            let rot_a = se3ppf::sim::rotation_from_euler(ra.euler_est[0], ra.euler_est[1], ra.euler_est[2]);
            let rot_b = se3ppf::sim::rotation_from_euler(rb.euler_est[0], rb.euler_est[1], rb.euler_est[2]);
            let frob = (rot_a.matrix() - rot_b.matrix()).norm();
            let pos = ((ra.p_est[0] - rb.p_est[0]).powi(2)
                + (ra.p_est[1] - rb.p_est[1]).powi(2)
                + (ra.p_est[2] - rb.p_est[2]).powi(2))
            .sqrt();
            max_div = max_div.max(frob).max(pos);
        }
        println!("[cross-form] {} max pose divergence over 5 s: {:.3e}", a.mode.tag(), max_div);
    }
}
