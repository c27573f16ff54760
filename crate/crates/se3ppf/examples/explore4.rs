// scratch: identify the aborting direct-filter seed and probe master seeds
use se3ppf::sensors::derive_run_seed;
use se3ppf::sim::{run_scenario, FilterSelection, RunOutcome, ScenarioConfig};

fn batch(master: u64, verbose: bool) -> (usize, usize) {
    let mut aborts = 0;
    let mut worst_ratio = 0.0f64;
    for i in 0..20u64 {
        for filter in [FilterSelection::Semidirect, FilterSelection::Direct] {
            let mut c = ScenarioConfig::paper_sv();
            c.noise = true;
            c.filter = filter;
            c.set_seed(derive_run_seed(master, i));
            let rep = run_scenario(&c).unwrap();
            let res = &rep.results[0];
            match &res.outcome {
                RunOutcome::Completed => {
                    for ch in 0..4 {
                        let wall = c.ppf.delta_bar[ch];
                        worst_ratio = worst_ratio.max(res.summary.channels[ch].max_ratio / wall);
                    }
                }
                other => {
                    aborts += 1;
                    if verbose {
                        println!(
                            "master={master} i={i} {filter:?}: {other:?} (len={} last_t={:?})",
                            res.series.len(),
                            res.series.last().map(|r| r.t)
                        );
                        if let Some(last) = res.series.last() {
                            println!(
                                "   last rec: e=({:+.3e},{:+.3},{:+.3},{:+.3}) xi1={:.3e} true_e1={:.3e}",
                                last.e[0], last.e[1], last.e[2], last.e[3], last.xi[0], last.true_e[0]
                            );
                        }
                    }
                }
            }
        }
    }
    if verbose {
        println!("master={master}: aborts={aborts}/40, worst wall-ratio={worst_ratio:.3}");
    }
    (aborts, 0)
}

fn main() {
    batch(42, true);
    for master in [7u64, 2026, 314159, 271828] {
        let (aborts, _) = batch(master, false);
        println!("master={master}: aborts={aborts}/40");
    }
}
