// Manual driver used while tuning: run a single numbered check with
// QSWAP_CRIT=<id> [QSWAP_FAST=1].
#[test]
fn run_one() {
    let Ok(id) = std::env::var("QSWAP_CRIT") else { return };
    let id: usize = id.parse().unwrap();
    let fast = std::env::var("QSWAP_FAST").is_ok();
    let cfg = qswap_core::ReportConfig::new(7, fast);
    let r = qswap_core::run_criterion(id, &cfg).unwrap();
    println!("criterion {}: {} ({:.1}s)", r.id, if r.pass { "PASS" } else { "FAIL" }, r.seconds);
    for n in &r.notes { println!("  {n}"); }
    assert!(r.pass);
}
