use qkinetic::collision::CollisionWorkspace;
use qkinetic::equilibrium::build_tables;
use qkinetic::grid::{SphereQuadrature, VelocityGrid};
use qkinetic::params::ModelParams;
use qkinetic::verifier::{check_nonlinear_bound, VerifyBundle};

fn main() {
    let seed: u64 = std::env::args().nth(1).unwrap().parse().unwrap();
    let delta: f64 = std::env::args().nth(2).unwrap_or("0".into()).parse().unwrap();
    let params = ModelParams::new(delta, 1.0, -1.0, 7.0).unwrap();
    let mk = |n: usize| {
        let grid = VelocityGrid::new(6.0, n).unwrap();
        let sphere = SphereQuadrature::new(4, 8).unwrap();
        let tables = build_tables(&grid, &params).unwrap();
        let ws = CollisionWorkspace::new(&grid, &sphere, params.gamma, 1.0).unwrap();
        (grid, tables, ws)
    };
    let (g13, t13, w13) = mk(13);
    let (g25, t25, w25) = mk(25);
    let base = VerifyBundle { params: &params, grid: &g13, tables: &t13, ws: &w13 };
    let fine = VerifyBundle { params: &params, grid: &g25, tables: &t25, ws: &w25 };
    let rep = check_nonlinear_bound(&base, &fine, 2.0, seed).unwrap();
    println!("seed={seed} delta={delta} pass={} {}", rep.pass, rep.details);
}
