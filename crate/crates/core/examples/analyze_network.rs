//! Parse a reaction network and inspect its structure: species, complexes,
//! stoichiometric rank, conservation laws, and the strongly connected
//! components of the complex graph.
//!
//! ```bash
//! cargo run --release --example analyze_network
//! ```

use rdentropy::crn::parse_network;

fn main() {
    let text = "\
        S1 -> S2 + S3 @ 1 p1\n\
        S2 + S3 -> 2 S2 @ 1 p1\n\
        2 S2 -> S1 @ 1 p1\n\
        2 S1 <=> 2 S3 @ 1 p2\n";
    let net = parse_network(text).expect("network parses");

    println!("species:    {:?}", net.species());
    println!("complexes:  {}", net.complexes().len());
    println!("reactions:  {}", net.reactions().len());
    println!("rank(W):    {}", net.stoich_rank());
    println!("q vectors:  {:?}", net.conservation_basis());

    for (l, range) in net.components().iter().enumerate() {
        let members: Vec<String> = net
            .complex_components()
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == l)
            .map(|(cid, _)| net.complexes()[cid].display(net.species()))
            .collect();
        println!(
            "component {l}: reactions {:?}, complexes {{{}}}",
            range,
            members.join(", ")
        );
    }

    let check = net.check_cross_edges();
    println!("no cross-component edges: {}", check.holds);

    // An irreversible chain violates the closure of components.
    let chain = parse_network("A -> B @ 1 p1\nB -> C @ 1 p1").unwrap();
    let check = chain.check_cross_edges();
    println!(
        "irreversible chain: cross-edge-free = {}, offending reactions = {:?}",
        check.holds, check.violations
    );
}
