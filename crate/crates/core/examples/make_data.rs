use mml_estim::models::{Model, Weibull};
use mml_estim::numerics::RngStream;
fn main() {
    let th = Weibull.params(2.0, 1.0).unwrap();
    let d = Weibull.sample(&th, 100, RngStream::new(7, 0)).unwrap();
    d.write(std::path::Path::new("data/weibull_n100_seed7.txt"), Some("Weibull(k=2, lambda=1), n=100, seed=7, stream=0")).unwrap();
}
