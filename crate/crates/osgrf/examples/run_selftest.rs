fn main() {
    let t0 = std::time::Instant::now();
    let reports = osgrf::selftest::run_selftest(&osgrf::selftest::SelfTestOptions::default());
    let mut failed = 0;
    for c in &reports {
        println!("[{}] {} - {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
        if !c.passed { failed += 1; }
    }
    println!("total {:?}, {} checks, {} failed", t0.elapsed(), reports.len(), failed);
}
