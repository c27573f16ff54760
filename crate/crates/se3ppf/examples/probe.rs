use se3ppf::liegroup::{HomogeneousTransform, Vec3};
use se3ppf::sensors::{propagate_truth_sampled, TruthState};
fn main() {
    let profile = |t: f64| {
        (
            Vec3::new((0.5 * t).sin(), 0.7 * (0.4 * t).cos(), 0.3),
            Vec3::new(0.3 * (0.6 * t).sin(), 0.1, 0.2 * t.cos()),
        )
    };
    let advance = |dt: f64, n: usize| {
        let mut s = TruthState::initial(HomogeneousTransform::identity());
        for k in 0..n {
            let t = k as f64 * dt;
            let samples = [profile(t), profile(t + 0.5 * dt), profile(t + dt)];
            s = propagate_truth_sampled(&s, &samples, dt);
        }
        s
    };
    let fine = advance(1e-4, 20_000);
    for dt in [1e-1f64, 5e-2, 2e-2, 1e-2, 5e-3] {
        let n = (2.0 / dt).round() as usize;
        let c = advance(dt, n);
        println!(
            "dt={dt:.0e}: rot err {:.3e}, pos err {:.3e}",
            (c.pose.rotation().matrix() - fine.pose.rotation().matrix()).norm(),
            (c.pose.position() - fine.pose.position()).norm()
        );
    }
}
