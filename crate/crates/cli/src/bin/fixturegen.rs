//! Regenerates the checked-in fixture corpus: the task files, one
//! cassette per task and mode, and the golden evaluation and report
//! files those cassettes must reproduce.
//!
//! Everything here is deterministic, and the expected headline numbers
//! are asserted before anything is written, so a drift in scoring
//! shows up as a loud failure rather than silently rewritten goldens.

use clap::Parser;
use std::path::{Path, PathBuf};
use waypoint_core::experiment::{
    build_evaluation, render_report, write_evaluation_file, Evaluation,
};
use waypoint_core::eval::MetricsOptions;
use waypoint_core::gateway::{Cassette, CassetteEntry, ScriptedBackend};
use waypoint_core::orchestration::{run_episode, RunConfig, RunMode, RunTrace};
use waypoint_core::agents::prompts::PromptSet;
use waypoint_core::sandbox::{load_sandbox, Sandbox};
use waypoint_core::world::{Goal, HardConstraintSpec};
use waypoint_core::experiment::TaskRecord;

#[derive(Parser)]
#[command(name = "fixturegen", about = "Regenerate fixture tasks, cassettes, and goldens")]
struct Args {
    /// Fixture tree root.
    #[arg(long, default_value = "fixtures")]
    root: PathBuf,
}

fn main() {
    let args = Args::parse();
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    runtime.block_on(generate(&args.root));
}

async fn generate(root: &Path) {
    let sandbox = load_sandbox(&root.join("sandbox")).expect("fixture sandbox");
    let tasks = task_records();
    let goals: Vec<Goal> = tasks.iter().map(|t| t.to_goal().expect("fixture task")).collect();

    write_tasks(&root.join("tasks"), &tasks);

    let prompts = PromptSet::default();
    let mut evaluations = Vec::new();
    for mode in RunMode::ALL {
        let config = RunConfig::for_mode(mode);
        let dir = root.join("cassettes").join(mode.label());
        std::fs::create_dir_all(&dir).expect("cassette dir");
        let mut traces: Vec<RunTrace> = Vec::new();
        for task in &tasks {
            let cassette = cassette_for(mode, &task.task_id);
            cassette
                .write_file(&dir.join(format!("{}.cassette", task.task_id)))
                .expect("write cassette");
            let goal = task.to_goal().expect("fixture task");
            let backend = ScriptedBackend::new(cassette);
            traces.push(run_episode(goal, &sandbox, &backend, &config, &prompts).await);
        }
        let evaluation = build_evaluation(
            mode.label(),
            &goals,
            &traces,
            &sandbox,
            &MetricsOptions::default(),
        )
        .expect("evaluation");
        check_expectations(mode, &evaluation);
        evaluations.push(evaluation);
    }

    let golden = root.join("golden");
    std::fs::create_dir_all(&golden).expect("golden dir");
    for evaluation in &evaluations {
        write_evaluation_file(&golden.join(format!("{}.eval", evaluation.name)), evaluation)
            .expect("write evaluation");
    }

    // A three-task fixed-mode evaluation backs the cheap CLI tests.
    let small = small_fixed_evaluation(&sandbox, &tasks, &goals, &prompts).await;
    write_evaluation_file(&golden.join("fixed_3.eval"), &small).expect("write evaluation");

    let report = render_report(&evaluations).expect("report");
    std::fs::write(golden.join("report.txt"), &report.text).expect("write report");
    std::fs::write(golden.join("report.csv"), &report.csv).expect("write report csv");

    println!("wrote {} tasks, {} cassettes, goldens under {}",
        tasks.len(),
        tasks.len() * RunMode::ALL.len(),
        golden.display());
}

async fn small_fixed_evaluation(
    sandbox: &Sandbox,
    tasks: &[TaskRecord],
    goals: &[Goal],
    prompts: &PromptSet,
) -> Evaluation {
    let config = RunConfig::for_mode(RunMode::Fixed);
    let mut traces = Vec::new();
    for task in &tasks[..3] {
        let backend = ScriptedBackend::new(cassette_for(RunMode::Fixed, &task.task_id));
        let goal = task.to_goal().expect("fixture task");
        traces.push(run_episode(goal, sandbox, &backend, &config, prompts).await);
    }
    build_evaluation("fixed", &goals[..3], &traces, sandbox, &MetricsOptions::default())
        .expect("small evaluation")
}

fn approx(value: f64, want: f64) -> bool {
    (value - want).abs() < 1e-9
}

/// The headline numbers the corpus is designed to produce. Checked on
/// every regeneration so fixture edits and scorer drift collide here.
fn check_expectations(mode: RunMode, evaluation: &Evaluation) {
    let m = &evaluation.metrics;
    let (delivery, cs_micro, cs_macro, hard_micro, hard_macro, final_pass) = match mode {
        RunMode::Fixed => (100.0, 98.75, 90.0, 92.0, 60.0, 60.0),
        RunMode::Orchestrated => (100.0, 100.0, 100.0, 100.0, 100.0, 100.0),
        RunMode::SingleAgent => (80.0, 77.5, 60.0, 74.0, 50.0, 30.0),
    };
    assert!(approx(m.delivery_rate, delivery), "{mode}: delivery {}", m.delivery_rate);
    assert!(approx(m.commonsense_micro, cs_micro), "{mode}: cs micro {}", m.commonsense_micro);
    assert!(approx(m.commonsense_macro, cs_macro), "{mode}: cs macro {}", m.commonsense_macro);
    assert!(approx(m.hard_micro, hard_micro), "{mode}: hard micro {}", m.hard_micro);
    assert!(approx(m.hard_macro, hard_macro), "{mode}: hard macro {}", m.hard_macro);
    assert!(approx(m.final_pass_rate, final_pass), "{mode}: final {}", m.final_pass_rate);
    match mode {
        RunMode::Orchestrated => {
            assert!(approx(evaluation.revisit_averages["TransportExpert"], 0.1));
            assert!(approx(evaluation.revisit_averages["HotelExpert"], 0.1));
            assert!(approx(evaluation.revisit_averages["RestaurantExpert"], 0.0));
            assert!(approx(evaluation.revisit_averages["AttractionExpert"], 0.0));
            assert_eq!(evaluation.hallucinations.total(), 0);
        }
        RunMode::Fixed => {
            assert!(evaluation.revisit_averages.values().all(|&v| approx(v, 0.0)));
            assert_eq!(evaluation.hallucinations.total(), 0);
        }
        RunMode::SingleAgent => {
            assert_eq!(evaluation.hallucinations.restaurant, 1);
            assert_eq!(evaluation.hallucinations.attraction, 1);
            assert_eq!(evaluation.hallucinations.total(), 2);
        }
    }
}

fn write_tasks(dir: &Path, tasks: &[TaskRecord]) {
    std::fs::create_dir_all(dir).expect("tasks dir");
    let jsonl = |records: &[TaskRecord]| {
        let mut out = String::new();
        for record in records {
            out.push_str(&serde_json::to_string(record).expect("task serialization"));
            out.push('\n');
        }
        out
    };
    std::fs::write(dir.join("tasks_10.jsonl"), jsonl(tasks)).expect("write tasks");
    std::fs::write(dir.join("tasks_3.jsonl"), jsonl(&tasks[..3])).expect("write tasks");
}

const DATES: [&str; 3] = ["2025-03-10", "2025-03-11", "2025-03-12"];

fn task(id: &str, query: &str, budget: Option<f64>, constraints: HardConstraintSpec) -> TaskRecord {
    TaskRecord {
        task_id: id.to_string(),
        query: query.to_string(),
        origin: "Seattle".into(),
        destination: "Rome".into(),
        duration_days: 3,
        dates: DATES.iter().map(|d| d.to_string()).collect(),
        traveler_count: 2,
        budget,
        constraints,
    }
}

fn task_records() -> Vec<TaskRecord> {
    let none = HardConstraintSpec::default;
    vec![
        task(
            "t01",
            "Plan a 3-day trip from Seattle to Rome for 2 people, March 10-12 2025, within $2,500.",
            Some(2500.0),
            none(),
        ),
        task(
            "t02",
            "Two of us want 3 days in Rome from Seattle, March 10-12 2025, budget $5,000; we need at least one vegetarian meal.",
            Some(5000.0),
            HardConstraintSpec { cuisines: vec!["vegetarian".into()], ..none() },
        ),
        task(
            "t03",
            "Cheap 3-day Rome trip from Seattle for 2, March 10-12 2025; keep the whole thing under $2,200.",
            Some(2200.0),
            none(),
        ),
        task(
            "t04",
            "3 days in Rome from Seattle for 2 people, March 10-12 2025, budget $4,500; we want an entire room to ourselves.",
            Some(4500.0),
            HardConstraintSpec { room_type: Some("entire room".into()), ..none() },
        ),
        task(
            "t05",
            "Seattle to Rome for 2, March 10-12 2025, $2,500 budget; we plan on hosting a small party, so the room must allow parties.",
            Some(2500.0),
            HardConstraintSpec { room_rules: vec!["parties".into()], ..none() },
        ),
        task(
            "t06",
            "Seattle to Rome, 2 travelers, March 10-12 2025; at least one seafood meal on the trip.",
            None,
            HardConstraintSpec { cuisines: vec!["seafood".into()], ..none() },
        ),
        task(
            "t07",
            "A 3-day Rome getaway from Seattle for 2, March 10-12 2025; total budget $2,500.",
            Some(2500.0),
            none(),
        ),
        task(
            "t08",
            "Seattle to Rome for two, March 10-12 2025, budget $3,000; we want italian and vegetarian food covered.",
            Some(3000.0),
            HardConstraintSpec { cuisines: vec!["italian".into(), "vegetarian".into()], ..none() },
        ),
        task(
            "t09",
            "3 days in Rome from Seattle, 2 people, March 10-12 2025, budget $2,500; book us a private room.",
            Some(2500.0),
            HardConstraintSpec { room_type: Some("private room".into()), ..none() },
        ),
        task(
            "t10",
            "Seattle to Rome, 2 travelers, March 10-12 2025; neither of us drives, so no self-driving.",
            None,
            HardConstraintSpec { transportation: Some("no self-driving".into()), ..none() },
        ),
    ]
}

/// Itinerary text assembled from interchangeable parts. Defaults are
/// the clean pass: F100/F103, Hotel Aurora, four distinct restaurants.
struct PlanParts {
    out_flight: &'static str,
    back_flight: &'static str,
    hotel: &'static str,
    d1_dinner: &'static str,
    d2_breakfast: &'static str,
    d2_lunch: &'static str,
    d2_dinner: &'static str,
    d3_breakfast: &'static str,
    d2_attraction: &'static str,
}

impl Default for PlanParts {
    fn default() -> Self {
        PlanParts {
            out_flight: "F100",
            back_flight: "F103",
            hotel: "Hotel Aurora, Rome",
            d1_dinner: "Trattoria Luna, Rome",
            d2_breakfast: "Cafe Tevere, Rome",
            d2_lunch: "Osteria Verde, Rome",
            d2_dinner: "Roma Grill, Rome",
            d3_breakfast: "-",
            d2_attraction: "Pantheon, Rome;Trevi Fountain, Rome",
        }
    }
}

impl PlanParts {
    fn render(&self) -> String {
        format!(
            "Day 1:\n\
             current_city: from Seattle to Rome\n\
             transportation: Flight Number: {out}, from Seattle to Rome\n\
             breakfast: -\n\
             lunch: -\n\
             dinner: {d1_dinner}\n\
             attraction: Colosseum, Rome\n\
             accommodation: {hotel}\n\
             \n\
             Day 2:\n\
             current_city: Rome\n\
             transportation: -\n\
             breakfast: {d2_breakfast}\n\
             lunch: {d2_lunch}\n\
             dinner: {d2_dinner}\n\
             attraction: {d2_attraction}\n\
             accommodation: {hotel}\n\
             \n\
             Day 3:\n\
             current_city: from Rome to Seattle\n\
             transportation: Flight Number: {back}, from Rome to Seattle\n\
             breakfast: {d3_breakfast}\n\
             lunch: -\n\
             dinner: -\n\
             attraction: -\n\
             accommodation: -\n",
            out = self.out_flight,
            back = self.back_flight,
            hotel = self.hotel,
            d1_dinner = self.d1_dinner,
            d2_breakfast = self.d2_breakfast,
            d2_lunch = self.d2_lunch,
            d2_dinner = self.d2_dinner,
            d3_breakfast = self.d3_breakfast,
            d2_attraction = self.d2_attraction,
        )
    }
}

fn entry(role: &str, text: &str) -> CassetteEntry {
    CassetteEntry { role: role.into(), request_digest: None, response_text: text.into() }
}

const FLIGHT_PROBE: &str =
    "Checking both directions: flight_search(Seattle, Rome, 2025-03-10) and \
     flight_search(Rome, Seattle, 2025-03-12).";
const TRANSPORT_PICK: &str =
    "F100 out on 2025-03-10 and F103 back on 2025-03-12 is the cheapest pairing, \
     880.00 per person round trip.";
const HOTEL_PROBE: &str = "Listing the options: hotel_search(Rome).";
const HOTEL_PICK: &str =
    "Hotel Aurora covers both nights: an entire room for up to 3 guests at 140.00 a night.";
const RESTAURANT_PROBE: &str = "Pulling the city list: resturant_search(Rome).";
const RESTAURANT_PICK: &str =
    "Trattoria Luna for the arrival dinner, then Cafe Tevere, Osteria Verde, and Roma Grill \
     across day two.";
const ATTRACTION_PROBE: &str = "Surveying sights: attraction_search(Rome).";
const ATTRACTION_PICK: &str =
    "Colosseum on arrival day; Pantheon and Trevi Fountain fill day two.";
const APPROVAL: &str = "PLAN APPROVED";

fn cassette_for(mode: RunMode, task_id: &str) -> Cassette {
    match mode {
        RunMode::Fixed => fixed_cassette(task_id),
        RunMode::Orchestrated => orchestrated_cassette(task_id),
        RunMode::SingleAgent => single_cassette(task_id),
    }
}

fn fixed_cassette(task_id: &str) -> Cassette {
    // The fixed pipeline never adapts to the task, which is exactly
    // what these scripts exercise: t06 books a return that does not
    // operate that day, t07 books the premium fares.
    let transport_pick = match task_id {
        "t06" => "F100 out on 2025-03-10; for the return, F105 has the lowest listed Rome fare.",
        "t07" => "The premium cabins are F101 out and F104 back; most comfortable option.",
        _ => TRANSPORT_PICK,
    };
    let plan = match task_id {
        "t06" => PlanParts { back_flight: "F105", ..Default::default() }.render(),
        "t07" => {
            PlanParts { out_flight: "F101", back_flight: "F104", ..Default::default() }.render()
        }
        _ => PlanParts::default().render(),
    };
    Cassette {
        entries: vec![
            entry("TransportExpert", FLIGHT_PROBE),
            entry("TransportExpert", transport_pick),
            entry("HotelExpert", HOTEL_PROBE),
            entry("HotelExpert", HOTEL_PICK),
            entry("RestaurantExpert", RESTAURANT_PROBE),
            entry("RestaurantExpert", RESTAURANT_PICK),
            entry("AttractionExpert", ATTRACTION_PROBE),
            entry("AttractionExpert", ATTRACTION_PICK),
            entry("PlanCompiler", &plan),
            entry("PlanCritic", APPROVAL),
        ],
    }
}

struct OrchTurn {
    expert: &'static str,
    probe: String,
    pick: String,
}

fn turn(expert: &'static str, probe: &str, pick: &str) -> OrchTurn {
    OrchTurn { expert, probe: probe.into(), pick: pick.into() }
}

fn orchestrated_cassette(task_id: &str) -> Cassette {
    let mut turns = vec![
        turn("TransportExpert", FLIGHT_PROBE, TRANSPORT_PICK),
        turn("HotelExpert", HOTEL_PROBE, HOTEL_PICK),
        turn("RestaurantExpert", RESTAURANT_PROBE, RESTAURANT_PICK),
        turn("AttractionExpert", ATTRACTION_PROBE, ATTRACTION_PICK),
    ];
    let mut endgame = vec![
        ("PlanCompiler", PlanParts::default().render()),
        ("PlanCritic", APPROVAL.to_string()),
    ];
    match task_id {
        "t03" => {
            turns[1].pick = "Tiber Shared Loft is 55.00 a night; tight budget, so that wins."
                .into();
            turns[2].pick =
                "Keeping it lean: Trattoria Luna, Cafe Tevere, and Osteria Verde; skip a \
                 second dinner out."
                    .into();
            endgame[0].1 = PlanParts {
                hotel: "Tiber Shared Loft, Rome",
                d2_dinner: "-",
                ..Default::default()
            }
            .render();
        }
        "t06" => {
            turns[2].probe =
                "Need seafood somewhere: resturant_search(Rome) and resturant_search(Seattle)."
                    .into();
            turns[2].pick =
                "Rome covers the Italian meals; Pike Chowder House back in Seattle covers \
                 the seafood request on departure day."
                    .into();
            endgame[0].1 = PlanParts {
                d3_breakfast: "Pike Chowder House, Seattle",
                ..Default::default()
            }
            .render();
        }
        "t07" => {
            turns[0].pick =
                "The premium cabins are F101 out and F104 back; most comfortable option.".into();
            turns.push(turn(
                "TransportExpert",
                FLIGHT_PROBE,
                "Rebooking onto F100 and F103; the premium fares put the trip far over budget.",
            ));
        }
        "t09" => {
            turns.push(turn(
                "HotelExpert",
                HOTEL_PROBE,
                "Casa Bellini is the private room: 95.00 a night, fits two, two-night minimum \
                 met.",
            ));
            endgame = vec![
                ("PlanCompiler", PlanParts::default().render()),
                (
                    "PlanCritic",
                    "The request was a private room; Hotel Aurora is an entire place. Revise \
                     the accommodation."
                        .to_string(),
                ),
                (
                    "PlanCompiler",
                    PlanParts { hotel: "Casa Bellini, Rome", ..Default::default() }.render(),
                ),
                ("PlanCritic", APPROVAL.to_string()),
            ];
        }
        _ => {}
    }

    let mut entries = Vec::new();
    for (i, t) in turns.iter().enumerate() {
        let reflection = match i {
            0 => "No coverage yet; transportation anchors the dates.".to_string(),
            _ => format!("{} reported; moving to the next gap.", turns[i - 1].expert),
        };
        entries.push(entry(
            "Orchestrator",
            &format!("REFLECTION: {reflection} NEXT: {}", t.expert),
        ));
        entries.push(entry(t.expert, &t.probe));
        entries.push(entry(t.expert, &t.pick));
    }
    entries.push(entry(
        "Orchestrator",
        "REFLECTION: Every domain is covered and consistent. NEXT: FINISH",
    ));
    for (role, text) in &endgame {
        entries.push(entry(role, text));
    }
    Cassette { entries }
}

fn single_cassette(task_id: &str) -> Cassette {
    let final_reply = match task_id {
        "t03" => PlanParts {
            hotel: "Tiber Shared Loft, Rome",
            d2_dinner: "Ristorante Fantasma, Rome",
            ..Default::default()
        }
        .render(),
        // Budget pressure pushes the lone agent into giving up mid-format.
        "t04" => "After reviewing the options I could not settle every field; here is my \
                  best sketch: fly out March 10, stay somewhere central, return March 12."
            .to_string(),
        "t05" => PlanParts {
            d2_attraction: "Pantheon, Rome;Crystal Gardens, Rome",
            ..Default::default()
        }
        .render(),
        "t07" => PlanParts { out_flight: "F101", back_flight: "F104", ..Default::default() }
            .render(),
        "t08" => "Day 1 we fly to Rome and eat at Trattoria Luna; day 2 is museums and \
                  Osteria Verde; day 3 we fly home after breakfast."
            .to_string(),
        _ => PlanParts::default().render(),
    };
    Cassette {
        entries: vec![
            entry("SingleAgent", FLIGHT_PROBE),
            entry("SingleAgent", HOTEL_PROBE),
            entry("SingleAgent", RESTAURANT_PROBE),
            entry("SingleAgent", ATTRACTION_PROBE),
            entry("SingleAgent", &final_reply),
        ],
    }
}
