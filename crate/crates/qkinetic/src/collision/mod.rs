//! Quadrature evaluation of the quantum collision operator, its
//! gain/damping splitting, the companion-occupancy splitting, the collision
//! frequency, and the nonlinear perturbation forms.

mod passes;
mod workspace;

pub use workspace::{CollisionWorkspace, WorkspaceError};

use crate::equilibrium::EquilibriumTables;
use crate::field::DistributionField;
use passes::{p_node_table, PassTables};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CollisionError {
    #[error("input field violates its admissibility bounds: {0}")]
    InadmissibleField(#[from] crate::field::FieldError),
    #[error("splitting produced a negative {which} value {value} at v-node {node}")]
    NegativeSplit {
        which: &'static str,
        value: f64,
        node: usize,
    },
    #[error("workspace grid size {ws} does not match field size {field}")]
    SizeMismatch { ws: usize, field: usize },
}

/// Elastic post-collision velocities for scattering direction `omega`:
/// `v' = v - [(v-u).omega] omega`, `u' = u + [(v-u).omega] omega`.
#[inline]
pub fn post_collision(v: [f64; 3], u: [f64; 3], omega: [f64; 3]) -> ([f64; 3], [f64; 3]) {
    let t = (v[0] - u[0]) * omega[0] + (v[1] - u[1]) * omega[1] + (v[2] - u[2]) * omega[2];
    (
        [v[0] - t * omega[0], v[1] - t * omega[1], v[2] - t * omega[2]],
        [u[0] + t * omega[0], u[1] + t * omega[1], u[2] + t * omega[2]],
    )
}

fn check_input(
    field: &DistributionField,
    x: usize,
    ws: &CollisionWorkspace,
) -> Result<(), CollisionError> {
    if field.n_v != ws.n_v {
        return Err(CollisionError::SizeMismatch {
            ws: ws.n_v,
            field: field.n_v,
        });
    }
    assert!(x < field.n_x, "x-node {x} out of range");
    let cap_tol = 1e-12 * field.params.pauli_cap().min(1e12).max(1.0);
    field.check_bounds(cap_tol)?;
    Ok(())
}

/// Full collision operator at one spatial node, gain minus loss assembled
/// per quadrature sample.
pub fn collision_operator(
    field: &DistributionField,
    x: usize,
    ws: &CollisionWorkspace,
    tables: &EquilibriumTables,
) -> Result<Vec<f64>, CollisionError> {
    check_input(field, x, ws)?;
    let p = p_node_table(tables, field.params.delta, field.params.rho);
    let tabs = PassTables::from_equilibrium(tables, &p);
    let out = passes::pauli_pass::<true>(
        ws,
        &tabs,
        field.slice_x(x),
        field.params.delta,
        field.params.rho,
    );
    Ok(out.collision)
}

/// Splitting output at one spatial node.
#[derive(Debug, Clone)]
pub struct SplitFields {
    /// Gain field (nonnegative).
    pub gain: Vec<f64>,
    /// Damping field (nonnegative).
    pub damping: Vec<f64>,
    /// Interpolation clamp events against the occupancy cap.
    pub clamp_events: u64,
}

/// Gain/damping splitting of the collision operator:
/// `C(F) = gain - damping * F` nodewise, both parts nonnegative on
/// admissible fields.
pub fn gain_and_damping(
    field: &DistributionField,
    x: usize,
    ws: &CollisionWorkspace,
    tables: &EquilibriumTables,
) -> Result<SplitFields, CollisionError> {
    check_input(field, x, ws)?;
    let p = p_node_table(tables, field.params.delta, field.params.rho);
    let tabs = PassTables::from_equilibrium(tables, &p);
    let out = passes::pauli_pass::<true>(
        ws,
        &tabs,
        field.slice_x(x),
        field.params.delta,
        field.params.rho,
    );
    check_nonnegative(&out.gain, "gain")?;
    check_nonnegative(&out.damping, "damping")?;
    Ok(SplitFields {
        gain: out.gain,
        damping: out.damping,
        clamp_events: out.clamp_events,
    })
}

/// Companion splitting driving `G = 1 - delta F`:
/// `-delta C(F) = companion_gain - damping * G` nodewise.
///
/// The damping coefficient coincides with the primary one.
pub fn companion_gain_and_damping(
    field: &DistributionField,
    x: usize,
    ws: &CollisionWorkspace,
    tables: &EquilibriumTables,
) -> Result<SplitFields, CollisionError> {
    check_input(field, x, ws)?;
    let p = p_node_table(tables, field.params.delta, field.params.rho);
    let tabs = PassTables::from_equilibrium(tables, &p);
    let out = passes::pauli_pass::<true>(
        ws,
        &tabs,
        field.slice_x(x),
        field.params.delta,
        field.params.rho,
    );
    check_nonnegative(&out.companion_gain, "companion gain")?;
    check_nonnegative(&out.damping, "companion damping")?;
    Ok(SplitFields {
        gain: out.companion_gain,
        damping: out.damping,
        clamp_events: out.clamp_events,
    })
}

/// Collision operator together with its splitting, evaluated in a single
/// sweep over the quadrature samples.
pub fn collision_and_splitting(
    field: &DistributionField,
    x: usize,
    ws: &CollisionWorkspace,
    tables: &EquilibriumTables,
) -> Result<(Vec<f64>, SplitFields), CollisionError> {
    check_input(field, x, ws)?;
    let p = p_node_table(tables, field.params.delta, field.params.rho);
    let tabs = PassTables::from_equilibrium(tables, &p);
    let out = passes::pauli_pass::<true>(
        ws,
        &tabs,
        field.slice_x(x),
        field.params.delta,
        field.params.rho,
    );
    Ok((
        out.collision,
        SplitFields {
            gain: out.gain,
            damping: out.damping,
            clamp_events: out.clamp_events,
        },
    ))
}

/// Gain/damping pair for one slice without the extra output streams; the
/// damped iteration's inner workhorse.
pub(crate) fn solver_split(
    slice: &[f64],
    params: &crate::params::ModelParams,
    ws: &CollisionWorkspace,
    tables: &EquilibriumTables,
) -> passes::PauliPassOut {
    let p = p_node_table(tables, params.delta, params.rho);
    let tabs = PassTables::from_equilibrium(tables, &p);
    passes::pauli_pass::<false>(ws, &tabs, slice, params.delta, params.rho)
}

fn check_nonnegative(vals: &[f64], which: &'static str) -> Result<(), CollisionError> {
    for (i, &v) in vals.iter().enumerate() {
        if v < 0.0 {
            return Err(CollisionError::NegativeSplit {
                which,
                value: v,
                node: i,
            });
        }
    }
    Ok(())
}

/// Collision frequency at one velocity node (strictly positive).
pub fn collision_frequency(
    v_node: usize,
    tables: &EquilibriumTables,
    ws: &CollisionWorkspace,
) -> f64 {
    let p = p_node_table(tables, tables.delta, tables.rho);
    let tabs = PassTables::from_equilibrium(tables, &p);
    passes::frequency_pass(ws, &tabs, &tables.mu, tables.delta, tables.rho, &[v_node])[0]
}

/// Collision frequency on a set of v-nodes (all nodes when `vs` is `None`).
pub fn collision_frequency_table(
    tables: &EquilibriumTables,
    ws: &CollisionWorkspace,
    vs: Option<&[usize]>,
) -> Vec<f64> {
    let p = p_node_table(tables, tables.delta, tables.rho);
    let tabs = PassTables::from_equilibrium(tables, &p);
    let all: Vec<usize>;
    let list = match vs {
        Some(l) => l,
        None => {
            all = (0..ws.n_v).collect();
            &all
        }
    };
    passes::frequency_pass(ws, &tabs, &tables.mu, tables.delta, tables.rho, list)
}

/// Nonlinear collision form in the fluctuation variable at one spatial
/// node; vanishes quadratically at zero perturbation.
pub fn nonlinear_form(
    f: &[f64],
    ws: &CollisionWorkspace,
    tables: &EquilibriumTables,
    vs: Option<&[usize]>,
) -> Vec<f64> {
    nonlinear_impl(f, ws, tables, false, vs)
}

/// Gain-side subset of the nonlinear form used by the damped iteration.
pub fn nonlinear_gain_form(
    f: &[f64],
    ws: &CollisionWorkspace,
    tables: &EquilibriumTables,
    vs: Option<&[usize]>,
) -> Vec<f64> {
    nonlinear_impl(f, ws, tables, true, vs)
}

fn nonlinear_impl(
    f: &[f64],
    ws: &CollisionWorkspace,
    tables: &EquilibriumTables,
    gain_only: bool,
    vs: Option<&[usize]>,
) -> Vec<f64> {
    let p = p_node_table(tables, tables.delta, tables.rho);
    let tabs = PassTables::from_equilibrium(tables, &p);
    let all: Vec<usize>;
    let list = match vs {
        Some(l) => l,
        None => {
            all = (0..ws.n_v).collect();
            &all
        }
    };
    passes::nonlinear_pass(
        ws,
        &tabs,
        tables,
        f,
        tables.delta,
        tables.rho,
        gain_only,
        list,
    )
}

/// Apply the linearized scattering operator (crate-internal entry used by
/// the linearized module).
pub(crate) fn scattering_apply(
    f: &[f64],
    ws: &CollisionWorkspace,
    tables: &EquilibriumTables,
    cutoff: Option<&(dyn Fn(f64) -> f64 + Sync)>,
    sign_flip_test_hook: bool,
    vs: &[usize],
) -> Vec<f64> {
    let p = p_node_table(tables, tables.delta, tables.rho);
    let tabs = PassTables::from_equilibrium(tables, &p);
    passes::scattering_pass(
        ws,
        &tabs,
        tables,
        f,
        tables.delta,
        tables.rho,
        cutoff,
        sign_flip_test_hook,
        vs,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn post_collision_examples() {
        let (vp, up) = post_collision([1.0, 0.0, 0.0], [0.0; 3], [1.0, 0.0, 0.0]);
        assert_eq!(vp, [0.0, 0.0, 0.0]);
        assert_eq!(up, [1.0, 0.0, 0.0]);

        let v = [0.3, -1.2, 2.0];
        let (vp, up) = post_collision(v, v, [0.0, 1.0, 0.0]);
        assert_eq!(vp, v);
        assert_eq!(up, v);
    }

    #[test]
    fn post_collision_conservation_random() {
        let mut rng = crate::rng::CounterRng::new(1234);
        for _ in 0..500 {
            let v = [rng.next_in(-5.0, 5.0), rng.next_in(-5.0, 5.0), rng.next_in(-5.0, 5.0)];
            let u = [rng.next_in(-5.0, 5.0), rng.next_in(-5.0, 5.0), rng.next_in(-5.0, 5.0)];
            let o = rng.next_unit_vector();
            let (vp, up) = post_collision(v, u, o);
            for a in 0..3 {
                assert!((vp[a] + up[a] - v[a] - u[a]).abs() < 1e-13);
            }
            let e0: f64 = v.iter().chain(u.iter()).map(|c| c * c).sum();
            let e1: f64 = vp.iter().chain(up.iter()).map(|c| c * c).sum();
            assert!((e0 - e1).abs() < 1e-13 * e0.max(1.0));
        }
    }
}
