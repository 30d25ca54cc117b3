use shapeopt::adjoint::solve_adjoint;
use shapeopt::fem::Dofs;
use shapeopt::flow::{objective, solve_primal, FluidProperties, SolverConfig};
use shapeopt::mesh::{channel_with_obstacle, ChannelSpec, Obstacle};
use shapeopt::sensitivity::{shape_derivative, shape_sensitivity, AugLagState};
use shapeopt::Vec2;

#[test]
fn gradient_check_production_chain() {
    let mesh = channel_with_obstacle(&ChannelSpec {
        length: 50.0,
        height: 10.0,
        obstacle: Obstacle::Circle { diameter: 1.0 },
        target_cells: 200,
    })
    .unwrap();
    println!("mesh: {} cells", mesh.cell_count());
    let props = FluidProperties {
        density: 1.0,
        viscosity: 1.0,
        inflow: Vec2::new(1.0, 0.0),
    };
    let cfg = SolverConfig {
        nonlinear_tol: 1e-12,
        max_picard: 60,
        ..SolverConfig::default()
    };
    let dofs = Dofs::new(&mesh);
    let al = AugLagState::new(mesh.barycenter(), mesh.volume());
    let primal = solve_primal(&mesh, &props, &cfg, None).unwrap();
    let adj = solve_adjoint(&mesh, &primal, &props, &cfg).unwrap();
    let gamma = shape_sensitivity(&mesh, &dofs, &primal, &adj, &props, &al).unwrap();
    let db = mesh.design_boundary().unwrap();

    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..db.len() {
        let node = db.nodes[i];
        let mut u = vec![Vec2::ZERO; mesh.node_count()];
        u[node] = db.normals[i];
        let jp_adjoint = shape_derivative(&mesh, &gamma, &u).unwrap();
        let fd = |s: f64| -> f64 {
            let m = mesh.morph(&u, s).unwrap();
            let d = Dofs::new(&m);
            let st = solve_primal(&m, &props, &cfg, Some(&primal)).unwrap();
            let (j, _) = objective(&m, &d, &st, &props, &al);
            j
        };
        let jp_fd = (fd(h) - fd(-h)) / (2.0 * h);
        let rel = (jp_adjoint - jp_fd).abs() / jp_fd.abs().max(1e-30);
        worst = worst.max(rel);
        println!(
            "node {node:4} at ({:7.4},{:7.4}): J'_adj={:12.6e} J'_fd={:12.6e} rel={:.6}%",
            mesh.node(node).x,
            mesh.node(node).y,
            jp_adjoint,
            jp_fd,
            100.0 * rel
        );
    }
    println!("worst relative error: {:.6}%", 100.0 * worst);
    assert!(worst < 0.02);
}
