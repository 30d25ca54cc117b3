use shapeopt::adjoint::solve_adjoint;
use shapeopt::fem::Dofs;
use shapeopt::flow::{
    assemble_linearized, solve_primal, FluidProperties, Linearization, SolverConfig,
};
use shapeopt::mesh::{channel_with_obstacle, BoundaryTag, ChannelSpec, Mesh, Obstacle};
use shapeopt::sensitivity::{shape_sensitivity, AugLagState};
use shapeopt::Vec2;

/// Consistent reaction force along direction `d`: the raw momentum residual
/// tested with a field that is `d` on the design velocity nodes.
fn reaction_drag(mesh: &Mesh, dofs: &Dofs, state: &shapeopt::flow::FlowState, props: &FluidProperties, d: Vec2) -> f64 {
    let sys = assemble_linearized(mesh, dofs, props, &state.velocity, Linearization::Picard);
    // flat state
    let mut x = vec![0.0; dofs.n_total()];
    for (n, v) in state.velocity.iter().enumerate() {
        x[dofs.vel_dof(n, 0)] = v.x;
        x[dofs.vel_dof(n, 1)] = v.y;
    }
    for (i, p) in state.pressure.iter().enumerate() {
        x[dofs.pressure_dof(i)] = *p;
    }
    let r = sys.residual(&x); // rhs - A x = -A x
    let mut design_nodes = std::collections::HashSet::new();
    for (k, be) in mesh.boundary_edges().iter().enumerate() {
        if be.tag != BoundaryTag::Design {
            continue;
        }
        let [a, b] = be.nodes;
        design_nodes.insert(a);
        design_nodes.insert(b);
        design_nodes.insert(dofs.edge_node(a, b).unwrap());
        let _ = k;
    }
    let mut f = 0.0;
    for &n in &design_nodes {
        f += d.x * -r[dofs.vel_dof(n, 0)] + d.y * -r[dofs.vel_dof(n, 1)];
    }
    f
}

#[test]
fn nodewise_fd_of_consistent_objective() {
    for target in [200usize, 800, 3000] {
        let mesh = channel_with_obstacle(&ChannelSpec {
            length: 50.0,
            height: 10.0,
            obstacle: Obstacle::Circle { diameter: 1.0 },
            target_cells: target,
        })
        .unwrap();
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
        let d = props.flow_direction();
        println!(
            "== target {target}: {} cells, drag_bnd vs drag_reaction: {:.8} vs {:.8}",
            mesh.cell_count(),
            {
                let f = shapeopt::flow::force(&mesh, &dofs, &primal, &props);
                -d.dot(f)
            },
            -reaction_drag(&mesh, &dofs, &primal, &props, d)
        );

        let top = (0..db.len())
            .max_by(|&a, &b| {
                mesh.node(db.nodes[a]).y.partial_cmp(&mesh.node(db.nodes[b]).y).unwrap()
            })
            .unwrap();
        let tip = (0..db.len())
            .min_by(|&a, &b| {
                mesh.node(db.nodes[a]).x.partial_cmp(&mesh.node(db.nodes[b]).x).unwrap()
            })
            .unwrap();
        let shoulder = (0..db.len())
            .min_by_key(|&i| {
                let p = mesh.node(db.nodes[i]);
                ((p - Vec2::new(-0.3536, 0.3536)).norm() * 1e9) as i64
            })
            .unwrap();

        let h = 1e-6;
        for i in [top, tip, shoulder] {
            let node = db.nodes[i];
            let mut u = vec![Vec2::ZERO; mesh.node_count()];
            u[node] = db.normals[i];
            let jp_gamma = gamma.gamma[i] * db.weights[i];
            let fd = |s: f64| -> f64 {
                let m = mesh.morph(&u, s).unwrap();
                let dd = Dofs::new(&m);
                let st = solve_primal(&m, &props, &cfg, Some(&primal)).unwrap();
                -reaction_drag(&m, &dd, &st, &props, d)
            };
            let jp_fd = (fd(h) - fd(-h)) / (2.0 * h);
            let rel = (jp_gamma - jp_fd).abs() / jp_fd.abs().max(1e-30);
            println!(
                "  node {node:4} at ({:7.4},{:7.4}): gamma*s={:12.6e} J'_fd={:12.6e} ratio={:.4} rel={:.2}%",
                mesh.node(node).x,
                mesh.node(node).y,
                jp_gamma,
                jp_fd,
                jp_gamma / jp_fd,
                100.0 * rel
            );
        }
    }
}
