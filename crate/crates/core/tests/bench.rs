use dsimon::cli::{run_sweep, summarize, BenchConfig, CSV_HEADER};
use dsimon::solver::Algorithm;

fn config(body: &str) -> BenchConfig {
    BenchConfig::parse(&format!("{body}output_path = \"unused\"\n")).unwrap()
}

#[test]
fn distributed_per_node_queries_track_n_minus_t() {
    let c = config("n_values = [8, 10, 12]\nt_values = [2]\ntrials = 100\nseed = 3\nalgorithms = [\"distributed\"]\n");
    let summaries = summarize(&run_sweep(&c).unwrap());
    assert_eq!(summaries.len(), 3);
    for s in &summaries {
        let k = (s.n - s.t) as f64;
        assert_eq!(s.verified, s.trials);
        assert!(
            (2.0 * k..=2.0 * k + 10.0).contains(&s.mean_node_queries),
            "n={} mean per-node queries {}",
            s.n,
            s.mean_node_queries
        );
    }
}

#[test]
fn classical_median_grows_like_square_root() {
    let c = config("n_values = [12, 16]\nt_values = [2]\ntrials = 200\nseed = 4\nalgorithms = [\"classical\"]\n");
    let summaries = summarize(&run_sweep(&c).unwrap());
    assert!(summaries
        .iter()
        .all(|s| s.algorithm == Algorithm::Classical));
    let ratio = summaries[1].median_total_queries / summaries[0].median_total_queries;
    assert!((2.0..=8.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn csv_has_one_row_per_cell() {
    let c = config("n_values = [5]\nt_values = [1, 2]\ntrials = 3\nseed = 0\nalgorithms = [\"centralized\", \"classical\"]\n");
    let text = dsimon::cli::csv(&summarize(&run_sweep(&c).unwrap()));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("5,1,centralized,3,3,0,"));
}
