use shapeopt::adjoint::solve_adjoint;
use shapeopt::deform::{solve_plaplace, PLaplaceConfig};
use shapeopt::fem::Dofs;
use shapeopt::flow::{objective, solve_primal, FluidProperties, SolverConfig};
use shapeopt::mesh::{channel_with_obstacle, ChannelSpec, Obstacle};
use shapeopt::sensitivity::{shape_sensitivity, AugLagState};
use shapeopt::Vec2;
use std::time::Instant;

#[test]
fn step_profile() {
    let mesh = channel_with_obstacle(&ChannelSpec {
        length: 50.0,
        height: 10.0,
        obstacle: Obstacle::Circle { diameter: 1.0 },
        target_cells: 3000,
    })
    .unwrap();
    let props = FluidProperties {
        density: 1.0,
        viscosity: 1.0,
        inflow: Vec2::new(1.0, 0.0),
    };
    let cfg = SolverConfig::default();
    let dofs = Dofs::new(&mesh);
    let al = AugLagState::new(mesh.barycenter(), mesh.volume());

    let t = Instant::now();
    let primal = solve_primal(&mesh, &props, &cfg, None).unwrap();
    println!("primal cold: {:.2}s ({} picard)", t.elapsed().as_secs_f64(), primal.picard_iterations);

    let t = Instant::now();
    let warm = solve_primal(&mesh, &props, &cfg, Some(&primal)).unwrap();
    println!("primal warm: {:.2}s ({} picard)", t.elapsed().as_secs_f64(), warm.picard_iterations);

    let t = Instant::now();
    let (_j, _) = objective(&mesh, &dofs, &primal, &props, &al);
    println!("objective: {:.3}s", t.elapsed().as_secs_f64());

    let t = Instant::now();
    let adj = solve_adjoint(&mesh, &primal, &props, &cfg).unwrap();
    println!("adjoint: {:.2}s", t.elapsed().as_secs_f64());

    let t = Instant::now();
    let gamma = shape_sensitivity(&mesh, &dofs, &primal, &adj, &props, &al).unwrap();
    println!("sensitivity: {:.3}s", t.elapsed().as_secs_f64());

    let t = Instant::now();
    let u = solve_plaplace(&mesh, &gamma, &PLaplaceConfig::with_exponent(4.0), None).unwrap();
    println!("plaplace cold (cont 2,3,4): {:.2}s ({} newton)", t.elapsed().as_secs_f64(), u.newton_iterations);

    let t = Instant::now();
    let u2 = solve_plaplace(&mesh, &gamma, &PLaplaceConfig::with_exponent(4.0), Some(&u)).unwrap();
    println!("plaplace warm: {:.2}s ({} newton)", t.elapsed().as_secs_f64(), u2.newton_iterations);

    let t = Instant::now();
    let q = mesh.quality();
    println!("quality: {:.3}s (maxAR {:.2})", t.elapsed().as_secs_f64(), q.max_aspect_ratio);

    let t = Instant::now();
    let m2 = mesh.morph(&u.u, 2e-3).unwrap();
    println!("morph: {:.3}s ({} nodes)", t.elapsed().as_secs_f64(), m2.node_count());
}
