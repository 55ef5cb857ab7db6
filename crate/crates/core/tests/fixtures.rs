use std::path::PathBuf;

use pwa_core::graph::{build_transition_graph, ControlLaw};
use pwa_core::io::{parse_network, parse_target};
use pwa_core::{models, Network};

fn read(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn law(name: &str) -> ControlLaw {
    serde_json::from_str(&read(name)).unwrap()
}

#[test]
fn network_files_match_builtin_models() {
    let cases: [(&str, Network); 4] = [
        ("toy.json", models::toggle_switch()),
        ("example1.json", models::example1()),
        ("example2.json", models::example2()),
        ("example1_extended.json", models::example1_with_controller(0.5, 0.5, 0.1)),
    ];
    for (file, net) in cases {
        assert_eq!(parse_network(&read(file)).unwrap(), net, "{file}");
    }
}

#[test]
fn targets_are_realized_by_bundled_laws() {
    for (net, target, law_file) in [
        (models::example1(), "example1_target.json", "example1_law.json"),
        (models::example2(), "example2_target.json", "example2_law.json"),
    ] {
        let tg_star = parse_target(net.dims(), &read(target)).unwrap();
        let tg = build_transition_graph(&net, &law(law_file)).unwrap();
        assert_eq!(tg.edges(), tg_star.edges(), "{target}");
    }
}
