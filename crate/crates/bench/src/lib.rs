//! Shared inputs for the benchmarks.

use blendkit::exec::SqliteDatabase;
use blendkit::model::{MockBackend, MockModelSpec};
use blendkit::retrieval::DocumentStore;

pub const MAP_QUERY: &str = "SELECT name FROM players WHERE {{LLMMap('Is this player over six feet tall?', players.name)}} = TRUE";

pub const BLEND_QUERY: &str = "WITH recent AS (SELECT name, team FROM players WHERE season >= 2020) \
    SELECT r.name, {{LLMMap('What position does this player play?', r.name)}} AS position \
    FROM recent r JOIN teams t ON r.team = t.name \
    WHERE t.city IN {{LLMQA('Which cities are on the west coast?', options=teams.city)}} \
    AND {{LLMQA('How many titles?')}} > 3 ORDER BY position LIMIT 10";

/// `players(name, team, season)` with `distinct` names, each on two rows.
pub fn players_db(distinct: usize) -> SqliteDatabase {
    let mut script = String::from(
        "CREATE TABLE teams(name TEXT, city TEXT);
         INSERT INTO teams VALUES ('Lakers', 'Los Angeles'), ('Celtics', 'Boston');
         CREATE TABLE players(name TEXT, team TEXT, season INTEGER);",
    );
    for i in 0..distinct {
        let team = if i % 2 == 0 { "Lakers" } else { "Celtics" };
        script.push_str(&format!(
            "INSERT INTO players VALUES ('player {i}', '{team}', 2019), ('player {i}', '{team}', 2021);"
        ));
    }
    SqliteDatabase::from_script(&script).expect("bench fixture")
}

pub fn chatty_mock() -> MockBackend {
    MockBackend::new(MockModelSpec {
        default_completion: "I think the answer is probably yes, around 42.".into(),
        ..MockModelSpec::default()
    })
    .expect("mock")
}

/// `docs` short documents with a few shared terms.
pub fn corpus(docs: usize) -> DocumentStore {
    let words = ["river", "mountain", "city", "player", "season", "coach", "museum", "bridge"];
    let texts: Vec<String> = (0..docs)
        .map(|i| {
            let a = words[i % words.len()];
            let b = words[(i / words.len()) % words.len()];
            format!("Document {i} is about the {a} and the {b}. It was written in {}.", 1900 + i % 120)
        })
        .collect();
    DocumentStore::from_texts(&texts)
}
