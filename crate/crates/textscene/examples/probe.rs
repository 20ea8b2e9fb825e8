use textscene::pipeline::{solve_query, RunConfig};
use textscene::query::parse_dsl;
use textscene::scene::ObjectLibrary;

fn try_query(name: &str, dsl: &str, budget: u64) {
    let lib = ObjectLibrary::builtin();
    let q = parse_dsl(dsl, &lib).unwrap();
    let mut cfg = RunConfig::default().with_seed(1);
    cfg.solver.max_expansions = budget;
    let t0 = std::time::Instant::now();
    match solve_query(&q, &cfg, &lib) {
        Ok((_c, out)) => println!(
            "{name}: {:?} sols={} exp={} evalprune={} shrinkprune={} drop={} t={:?}",
            out.status, out.solutions.len(), out.stats.expansions,
            out.stats.eval_prunes, out.stats.shrink_prunes, out.stats.dropped_at_tol, t0.elapsed()
        ),
        Err(textscene::pipeline::PipelineError::BudgetExhausted { stats }) => println!(
            "{name}: BUDGET exp={} evalprune={} shrinkprune={} drop={} t={:?}",
            stats.expansions, stats.eval_prunes, stats.shrink_prunes, stats.dropped_at_tol, t0.elapsed()
        ),
        Err(e) => println!("{name}: error {e} t={:?}", t0.elapsed()),
    }
}

fn main() {
    try_query("bed only", "count 1 bed-0\n", 200_000);
    try_query("lamp on ns", "lamp-0 on night-stand-0\n", 200_000);
    try_query("pic above bed", "picture-0 above bed-0\n", 500_000);
    try_query("ns right bed:head", "night-stand-0 right bed-0:head\n", 500_000);
    try_query("ns+dresser", "night-stand-0 right bed-0:head\ndresser-0 left bed-0:head\n", 500_000);
    try_query("table1", "picture-0 above bed-0\nnight-stand-0 right bed-0:head\nlamp-0 on night-stand-0\npicture-1 above lamp-0\ndresser-0 left bed-0:head\n", 500_000);
}
