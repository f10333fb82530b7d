mod oracles;

#[test]
fn metrics_match_per_pixel_recount() {
    let detail = oracles::metrics::check(3).unwrap_or_else(|e| panic!("{e}"));
    println!("{detail}");
}
