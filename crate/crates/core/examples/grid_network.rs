//! Build the small grid, find its central link and round-trip it through the
//! text format.

use cav_nrc::network::{build_grid, central_edges, links, load_network, save_network};

fn main() {
    let net = build_grid(3, 4, 100.0, 13.89, 1).expect("valid grid");
    println!("nodes: {}, edges: {}, links: {}", net.nodes().len(), net.edges().len(), links(&net).len());
    println!("strongly connected: {}", net.is_strongly_connected());
    println!("centroid: {:?}", net.centroid().unwrap());

    for id in central_edges(&net, 1).unwrap() {
        let e = net.edge(id).unwrap();
        println!("central edge {id}: node {} -> node {}, midpoint {:?}", e.from, e.to, net.midpoint(e));
    }

    let text = save_network(&net);
    let back = load_network(&text).expect("round trip");
    assert_eq!(back, net);
    println!("\nfirst lines of the saved network:");
    for line in text.lines().take(4) {
        println!("  {line}");
    }
}
