//! Quick timing probe for the production grid size.

use qkinetic::collision::{collision_operator, gain_and_damping, CollisionWorkspace};
use qkinetic::equilibrium::build_tables;
use qkinetic::field::DistributionField;
use qkinetic::grid::{SphereQuadrature, VelocityGrid};
use qkinetic::params::ModelParams;
use std::time::Instant;

fn main() {
    let grid = VelocityGrid::new(6.0, 13).unwrap();
    let sphere = SphereQuadrature::new(4, 8).unwrap();
    let params = ModelParams::new(1.0, 1.0, -1.0, 6.0).unwrap();
    let tables = build_tables(&grid, &params).unwrap();
    let t0 = Instant::now();
    let ws = CollisionWorkspace::new(&grid, &sphere, params.gamma, 1.0).unwrap();
    println!("workspace build: {:?} ({} KB tables)", t0.elapsed(), ws.table_bytes() >> 10);

    let field = DistributionField::new(tables.mu.clone(), 1, grid.len(), params).unwrap();

    let t0 = Instant::now();
    let c = collision_operator(&field, 0, &ws, &tables).unwrap();
    println!("collision pass: {:?}  (c[0]={:e})", t0.elapsed(), c[0]);

    let t0 = Instant::now();
    let s = gain_and_damping(&field, 0, &ws, &tables).unwrap();
    println!("gain/damping pass: {:?} (gain[0]={:e})", t0.elapsed(), s.gain[0]);

    // Classical path.
    let params0 = ModelParams::new(0.0, 1.0, -1.0, 6.0).unwrap();
    let tables0 = build_tables(&grid, &params0).unwrap();
    let field0 = DistributionField::new(tables0.mu.clone(), 1, grid.len(), params0).unwrap();
    let t0 = Instant::now();
    let c = collision_operator(&field0, 0, &ws, &tables0).unwrap();
    println!("classical pass: {:?} (c[0]={:e})", t0.elapsed(), c[0]);
}
