//! Source-level layering guards. The transport layer must stay
//! ignorant of the domain above it, and the data layers must not
//! reach up into transport; these scans fail the build if an import
//! crosses the line.

const GATEWAY: &str = include_str!("../src/gateway.rs");
const SANDBOX: &str = include_str!("../src/sandbox/mod.rs");
const SANDBOX_LOAD: &str = include_str!("../src/sandbox/load.rs");
const TOOLS: &str = include_str!("../src/tools.rs");
const PLAN: &str = include_str!("../src/plan.rs");
const EVAL: &str = include_str!("../src/eval.rs");
const PROMPTS: &str = include_str!("../src/agents/prompts.rs");

fn assert_never_mentions(source_name: &str, source: &str, needles: &[&str]) {
    for needle in needles {
        assert!(
            !source.contains(needle),
            "{source_name} must not reference {needle}"
        );
    }
}

#[test]
fn gateway_knows_nothing_about_the_domain() {
    assert_never_mentions(
        "gateway.rs",
        GATEWAY,
        &[
            "crate::agents",
            "crate::orchestration",
            "crate::plan",
            "crate::world",
            "crate::eval",
            "crate::sandbox",
            "crate::tools",
            "crate::experiment",
        ],
    );
}

#[test]
fn data_layers_never_reach_into_transport() {
    for (name, source) in [
        ("sandbox/mod.rs", SANDBOX),
        ("sandbox/load.rs", SANDBOX_LOAD),
        ("tools.rs", TOOLS),
        ("plan.rs", PLAN),
        ("eval.rs", EVAL),
    ] {
        assert_never_mentions(name, source, &["crate::gateway", "reqwest", "axum"]);
    }
}

#[test]
fn evaluation_is_offline() {
    // Scoring consumes finished traces; it never talks to agents,
    // never awaits, and never spawns.
    assert_never_mentions("eval.rs", EVAL, &["crate::agents", "async fn", "tokio", "await"]);
}

#[test]
fn prompt_templates_live_in_one_place() {
    // Every template file is included from the prompts module and
    // nowhere else.
    for (name, source) in [
        ("gateway.rs", GATEWAY),
        ("eval.rs", EVAL),
        ("tools.rs", TOOLS),
        ("plan.rs", PLAN),
    ] {
        assert!(
            !source.contains("include_str!(\"prompts/"),
            "{name} must not embed prompt templates"
        );
    }
    assert!(PROMPTS.contains("include_str!"), "prompts.rs holds the templates");
}
