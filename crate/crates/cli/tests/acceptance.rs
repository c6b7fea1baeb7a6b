//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use ffgmc_core::enumerator::all_states;
use ffgmc_core::enumerator::forests::enumerate_forests;
use ffgmc_core::finality::{justified_checkpoints_gfp_with, justified_checkpoints_with};
use ffgmc_core::model::{default_universe, is_valid_ffg_vote, valid_checkpoints};
use ffgmc_core::*;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, &'static str, Box<dyn Fn() -> Outcome + 'a>);

fn ffgmc(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ffgmc")).args(args).output().expect("spawn ffgmc")
}

fn within(limit: Duration, t: Instant, detail: String) -> Outcome {
    let took = t.elapsed();
    if took <= limit {
        Ok(format!("{detail} in {:.2}s (limit {}s)", took.as_secs_f64(), limit.as_secs()))
    } else {
        Err(format!("{detail} but took {:.2}s (limit {}s)", took.as_secs_f64(), limit.as_secs()))
    }
}

fn crit3() -> Bounds {
    Bounds { max_ffg_votes: 4, max_votes: 12, ..Bounds::new(2, 4) }
}

fn ac1() -> Outcome {
    let t = Instant::now();
    let counts: Vec<usize> = (1..=4).map(|n| enumerate_forests(n).len()).collect();
    let cayley: Vec<usize> = (1..=4u32).map(|n| (n as usize + 1).pow(n - 1)).collect();
    if counts != cayley || counts != [1, 3, 16, 125] {
        return Err(format!("counts {counts:?}, expected {cayley:?}"));
    }
    within(Duration::from_secs(1), t, format!("counts {counts:?}"))
}

fn ac2() -> Outcome {
    let t = Instant::now();
    let b = Bounds { max_ffg_votes: 3, max_votes: 9, ..Bounds::new(2, 4) };
    let (mut states, mut exceptions) = (0u64, 0u64);
    for s in all_states(&b).map_err(|e| e.to_string())? {
        let u = default_universe(&s);
        if justified_checkpoints_with(&s, &u, &Rules::STANDARD)
            != justified_checkpoints_gfp_with(&s, &u, &Rules::STANDARD)
        {
            exceptions += 1;
        }
        states += 1;
    }
    if exceptions > 0 {
        return Err(format!("{exceptions} of {states} states differ"));
    }
    within(Duration::from_secs(300), t, format!("{states} states, 0 exceptions"))
}

fn ac3() -> Outcome {
    let t = Instant::now();
    let r = search(&crit3(), Mutation::None, &SearchOptions::default()).map_err(|e| e.to_string())?;
    if r.verdict != Verdict::HoldsExhaustively {
        return Err(format!("verdict {}", r.verdict.name()));
    }
    let c = r.counters;
    within(
        Duration::from_secs(3600),
        t,
        format!("holds-exhaustively over {} checked + {} pruned states", c.states_checked, c.states_pruned),
    )
}

fn ac4(dir: &Path) -> Outcome {
    let mut lines = Vec::new();
    for (m, rule) in
        [(Mutation::QuorumHalf, "strict"), (Mutation::DisableSlashing, "strict"), (Mutation::DropAncestry, "nonstrict")]
    {
        let t = Instant::now();
        let b = crit3();
        let report = dir.join(format!("{m}.json"));
        let o = ffgmc(&[
            "search",
            "--blocks",
            &b.n_blocks.to_string(),
            "--validators",
            &b.n_validators.to_string(),
            "--max-chkp-slot",
            &b.max_chkp_slot.to_string(),
            "--max-ffg",
            &b.max_ffg_votes.to_string(),
            "--max-votes",
            &b.max_votes.to_string(),
            "--slot-rule",
            rule,
            "--mutation",
            &m.to_string(),
            "--out",
            report.to_str().unwrap(),
        ]);
        if o.status.code() != Some(1) {
            return Err(format!("{m}: search exit {:?}", o.status.code()));
        }
        let replay = ffgmc(&["check", report.to_str().unwrap()]);
        if replay.status.code() != Some(1) {
            return Err(format!("{m}: check exit {:?}", replay.status.code()));
        }
        lines.push(within(Duration::from_secs(600), t, format!("{m} ({rule}) replays"))?);
    }
    Ok(lines.join("; "))
}

fn ac5() -> Outcome {
    let t = Instant::now();
    let b = Bounds { graph_filter: Some(CatalogId::SingleChain), ..crit3() };
    let r = search(&b, Mutation::None, &SearchOptions::default()).map_err(|e| e.to_string())?;
    let c = r.counters;
    if r.verdict != Verdict::HoldsExhaustively || c.graphs_pruned != 1 || c.states_checked != 0 {
        return Err(format!("verdict {} with counters {c:?}", r.verdict.name()));
    }
    within(Duration::from_secs(60), t, "holds-exhaustively, graph removed by the vacuity prune".into())
}

fn ac6() -> Outcome {
    let t = Instant::now();
    let o = ffgmc(&[
        "example",
        "--property",
        "finalized-nongenesis",
        "--blocks",
        "1",
        "--validators",
        "4",
        "--max-votes",
        "6",
    ]);
    if o.status.code() != Some(0) {
        return Err(format!("exit {:?}", o.status.code()));
    }
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).map_err(|e| e.to_string())?;
    let finalized = r["scenario"]["finalized"].as_array().map_or(0, |a| a.len());
    if finalized < 2 {
        return Err("example does not finalize a non-genesis checkpoint".into());
    }
    within(Duration::from_secs(10), t, format!("{} votes", r["scenario"]["votes"].as_array().map_or(0, |a| a.len())))
}

/// Class of a state up to validator and block relabelling. Votes are written
/// with block positions; blocks are relabelled by every permutation and the
/// smallest encoding wins.
fn class_key(state: &ProtocolState) -> Vec<u32> {
    let f = &state.forest;
    let n = f.len() - 1;
    let mut best: Option<Vec<u32>> = None;
    for perm in permutations(n) {
        // perm[i] is the new label of block i+1; genesis stays 0
        let map = |b: BlockId| if b.is_genesis() { 0 } else { perm[b.index() - 1] as u32 + 1 };
        let mut parents = vec![0u32; n];
        for blk in f.blocks().iter().skip(1) {
            parents[map(blk.id) as usize - 1] = blk.parent.map_or(u32::MAX, map);
        }
        let mut per_validator: BTreeMap<u32, BTreeSet<[u32; 5]>> = BTreeMap::new();
        for sv in &state.votes {
            let (s, t) = (sv.vote.source, sv.vote.target);
            per_validator.entry(sv.validator.0).or_default().insert([map(s.block), s.c, map(t.block), t.c, t.p]);
        }
        let mut sets: Vec<Vec<u32>> = per_validator.into_values().map(|s| s.into_iter().flatten().collect()).collect();
        sets.sort();
        let mut key = parents;
        for s in sets {
            key.push(u32::MAX - 1);
            key.extend(s);
        }
        if best.as_ref().is_none_or(|b| key < *b) {
            best = Some(key);
        }
    }
    best.unwrap_or_default()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Unreduced enumeration: every labelled forest, every per-validator subset
/// of the valid links, total and union limits applied afterwards.
fn brute_force(b: &Bounds, mut visit: impl FnMut(&ProtocolState)) {
    for forest in enumerate_forests(b.n_blocks) {
        let forest = Arc::new(forest);
        let probe = ProtocolState::new(forest.clone(), b.n_validators, [], b.slot_rule).unwrap();
        let cps = valid_checkpoints(&forest, b.slot_rule, b.max_chkp_slot);
        let mut links = Vec::new();
        for &s in &cps {
            for &t in &cps {
                let v = FfgVote::new(s, t);
                if is_valid_ffg_vote(&probe, &v).unwrap() {
                    links.push(v);
                }
            }
        }
        let n = b.n_validators as usize;
        let mut choice: Vec<Vec<usize>> = vec![Vec::new(); n];
        let links = &links;
        assign(0, 0, links, b, &mut choice, &mut |choice| {
            let union: BTreeSet<usize> = choice.iter().flatten().copied().collect();
            if union.len() > b.max_ffg_votes {
                return;
            }
            let votes = choice.iter().enumerate().flat_map(|(v, ls)| {
                ls.iter().map(move |&i| SignedVote { vote: links[i], validator: ValidatorId(v as u32) })
            });
            visit(&ProtocolState::new(forest.clone(), b.n_validators, votes, b.slot_rule).unwrap());
        });
    }
}

fn assign(
    v: usize,
    used: usize,
    links: &[FfgVote],
    b: &Bounds,
    choice: &mut Vec<Vec<usize>>,
    visit: &mut dyn FnMut(&[Vec<usize>]),
) {
    if v == choice.len() {
        visit(choice);
        return;
    }
    let room = b.max_votes - used;
    for k in 0..=room.min(links.len()) {
        for subset in combinations(links.len(), k) {
            choice[v] = subset;
            assign(v + 1, used + k, links, b, choice, visit);
        }
    }
    choice[v].clear();
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    go(0, n, k, &mut cur, &mut out);
    out
}

/// Brute-force classes and reduced classes must coincide, the reduced count
/// must equal the number of classes when no forest has automorphisms, and the
/// searched verdict must match the brute-force verdict under every mutation.
fn symmetry_check(b: &Bounds, exact_count: bool) -> Outcome {
    let mut brute: BTreeMap<Vec<u32>, Vec<bool>> = BTreeMap::new();
    let mut labelled = 0u64;
    brute_force(b, |s| {
        labelled += 1;
        brute
            .entry(class_key(s))
            .or_insert_with(|| Mutation::ALL.iter().map(|m| accountable_safety_with(s, &m.rules()).holds).collect());
    });
    let mut reduced = BTreeSet::new();
    let mut reduced_count = 0u64;
    for s in all_states(b).map_err(|e| e.to_string())? {
        reduced_count += 1;
        reduced.insert(class_key(&s));
    }
    if reduced.len() as u64 != reduced_count && exact_count {
        return Err(format!("reduced search lists {reduced_count} states for {} classes", reduced.len()));
    }
    if brute.len() != reduced.len() || !brute.keys().eq(reduced.iter()) {
        return Err(format!("brute-force classes {} vs reduced classes {}", brute.len(), reduced.len()));
    }
    let mut falsified = Vec::new();
    for (i, m) in Mutation::ALL.iter().enumerate() {
        let brute_holds = brute.values().all(|h| h[i]);
        let r = search(b, *m, &SearchOptions::default()).map_err(|e| e.to_string())?;
        let searched_holds = match r.verdict {
            Verdict::HoldsExhaustively => true,
            Verdict::CounterexampleFound => false,
            other => return Err(format!("{m}: verdict {}", other.name())),
        };
        if brute_holds != searched_holds {
            return Err(format!("{m}: brute force holds={brute_holds}, search holds={searched_holds}"));
        }
        if !searched_holds {
            falsified.push(m.name());
        }
    }
    Ok(format!(
        "(blocks {}, N {}, votes {}) {labelled} labelled states, {} classes, reduced count {reduced_count}, falsified [{}]",
        b.n_blocks,
        b.n_validators,
        b.max_votes,
        brute.len(),
        falsified.join(" ")
    ))
}

fn ac7() -> Outcome {
    let t = Instant::now();
    let tiny = symmetry_check(&Bounds { max_votes: 3, ..Bounds::new(1, 3) }, true)?;
    // two blocks admit a fork, so verdicts under the mutations are not all trivial
    let fork = symmetry_check(&Bounds { max_ffg_votes: 4, max_votes: 4, ..Bounds::new(2, 2) }, false)?;
    within(Duration::from_secs(600), t, format!("{tiny}; {fork}"))
}

fn solver_command() -> Option<String> {
    let script = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scripts/cvc5_file.py");
    let candidates = match std::env::var("FFGMC_SOLVER") {
        Ok(cmd) => vec![cmd],
        Err(_) => vec!["cvc5 --sets-exp {file}".to_string(), format!("python3 {script} --sets-exp {{file}}")],
    };
    let dir = tempfile::tempdir().ok()?;
    let probe = dir.path().join("probe.smt2");
    std::fs::write(&probe, "(set-logic ALL)\n(check-sat)\n").ok()?;
    candidates.into_iter().find(|cmd| {
        let o = ffgmc(&["solve", "--input", probe.to_str().unwrap(), "--solver-cmd", cmd, "--timeout", "60"]);
        o.status.code() == Some(1)
    })
}

fn ac8() -> Outcome {
    let Some(cmd) = solver_command() else {
        let o = ffgmc(&["solve", "--solver-cmd", "/nonexistent/solver {file}"]);
        if o.status.code() != Some(3) {
            return Err(format!("absent solver gave exit {:?}", o.status.code()));
        }
        return Ok("skipped: no solver installed (solver-absent path exits 3)".into());
    };
    let t = Instant::now();
    let base =
        ["solve", "--hashes", "3", "--checkpoints", "5", "--validators", "4", "--timeout", "7200", "--solver-cmd"];
    let run = |extra: &[&str]| {
        let mut args: Vec<&str> = base.to_vec();
        args.push(&cmd);
        args.extend_from_slice(extra);
        ffgmc(&args).status.code()
    };
    let safe = run(&[]);
    if safe != Some(0) {
        return Err(format!("baseline exit {safe:?}, expected 0 (unsat)"));
    }
    let broken = run(&["--mutation", "quorum-half"]);
    if broken != Some(1) {
        return Err(format!("quorum-half exit {broken:?}, expected 1 (sat)"));
    }
    within(Duration::from_secs(2 * 7200), t, "baseline unsat, quorum-half sat".into())
}

fn main() {
    let dir = tempfile::tempdir().expect("tempdir");
    let criteria: Vec<Criterion> = vec![
        ("AC1", "forest counts", Box::new(ac1)),
        ("AC2", "least and greatest fixpoints agree", Box::new(ac2)),
        ("AC3", "exhaustive safety", Box::new(ac3)),
        ("AC4", "mutations falsified and replayed", Box::new(|| ac4(dir.path()))),
        ("AC5", "single chain vacuity", Box::new(ac5)),
        ("AC6", "finalized example", Box::new(ac6)),
        ("AC7", "symmetry reduction soundness", Box::new(ac7)),
        ("AC8", "solver cross-check", Box::new(ac8)),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        match run() {
            Ok(detail) => println!("{id} PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("{id} FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
