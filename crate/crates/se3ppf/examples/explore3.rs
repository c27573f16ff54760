// scratch: reproduce the one-frame R_y spike on seed 42
use se3ppf::liegroup::{HomogeneousTransform, Vec3};
use se3ppf::reconstruction::{reconstruct_pose, solve_wahba};
use se3ppf::sensors::{landmark_pairs, measure, normalize_pairs, propagate_truth, TruthState};
use se3ppf::sim::ScenarioConfig;

fn main() {
    let cfg = ScenarioConfig::paper_sv();
    let suite = &cfg.sensors;
    let mut rng = suite.noise_stream();
    let mut truth = TruthState::initial(HomogeneousTransform::identity());
    let dt = 1e-3;
    let mut worst = (0.0f64, 0usize);
    let mut spikes = 0;
    for k in 0..30_000usize {
        let t = k as f64 * dt;
        let (omega, v) = cfg.profile.sample(t);
        let frame = measure(&truth, &omega, &v, suite, true, &mut rng);
        let pairs = normalize_pairs(&frame, suite).unwrap();
        let recon = reconstruct_pose(&pairs, &landmark_pairs(&frame, suite)).unwrap();
        // R_y error vs truth
        let err = recon.r_y.compose(&truth.pose.rotation().transpose()).normalized_distance();
        if err > worst.0 {
            worst = (err, k);
        }
        if err > 0.05 {
            spikes += 1;
            if spikes < 8 {
                let b1 = &frame.body_ref_vectors[0];
                let b2 = &frame.body_ref_vectors[1];
                let clean1 = truth.pose.rotation().rotate_inverse(&suite.reference_vectors[0].inertial);
                let clean2 = truth.pose.rotation().rotate_inverse(&suite.reference_vectors[1].inertial);
                println!(
                    "k={k} t={t:.3} Ry_err={err:.4} |n1|={:.3} |n2|={:.3} ang(b1,b2)={:.1}deg",
                    (b1 - clean1 - suite.reference_vectors[0].bias).norm(),
                    (b2 - clean2 - suite.reference_vectors[1].bias).norm(),
                    (b1.normalize().dot(&b2.normalize())).acos().to_degrees()
                );
                // angle between the clean body vectors for reference
                println!(
                    "          clean ang={:.1}deg  cross_norm={:.3}",
                    (clean1.normalize().dot(&clean2.normalize())).acos().to_degrees(),
                    b1.normalize().cross(&b2.normalize()).norm()
                );
                // wahba on the two RAW pairs without augmentation
                let two = &pairs[..2];
                if let Ok(r2) = solve_wahba(two) {
                    let e2 = r2.compose(&truth.pose.rotation().transpose()).normalized_distance();
                    println!("          two-pair wahba err={e2:.4}, aug pair err contribution?");
                }
                for (i, p) in pairs.iter().enumerate() {
                    let pred = truth.pose.rotation().rotate_inverse(&p.inertial);
                    println!(
                        "          pair{i}: body·pred={:+.4} weight={:.1}",
                        p.body.dot(&pred),
                        p.weight
                    );
                }
            }
        }
        truth = propagate_truth(&truth, &omega, &v, dt);
    }
    println!("worst Ry ‖err‖_I = {:.4} at k={}, spikes(>0.05)={spikes}", worst.0, worst.1);
}
