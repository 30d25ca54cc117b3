use shapeopt::mesh::{channel_with_obstacle, ChannelSpec, Obstacle};

#[test]
fn stats() {
    for target in [200, 1000, 3000] {
        let m = channel_with_obstacle(&ChannelSpec {
            length: 50.0,
            height: 10.0,
            obstacle: Obstacle::Circle { diameter: 1.0 },
            target_cells: target,
        })
        .unwrap();
        let q = m.quality();
        let db = m.design_boundary().unwrap();
        println!(
            "target {target}: cells={} nodes={} design={} maxAR={:.3} minAng={:.2} vol={:.6} tip={:?}",
            m.cell_count(),
            m.node_count(),
            db.len(),
            q.max_aspect_ratio,
            q.min_angle,
            m.volume(),
            m.tip_metrics().unwrap(),
        );
    }
}
