//! Per-file parameter search.
//!
//! For every window size (and maximum match length) the match budget `M` is
//! hill-climbed from a start value scaled linearly with the window
//! (`28` at 8 KiB), moving by `±step` while that improves the compressed size
//! and halving the step otherwise. The remaining guard-flag combinations are
//! then tried at the best and the starting `M`. Trials run in parallel; the
//! outcome does not depend on scheduling because ties are broken on the
//! parameters (smaller window, smaller `M`, guards off first).

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::codec::{compress, ratio};
use crate::error::{Error, Result};
use crate::window_search::SearchParams;

/// How the match budget is explored for each window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MatchStrategy {
    HillClimb,
    /// Every `M` in `1..=max`.
    Exhaustive {
        max: usize,
    },
    /// Exactly these values.
    Fixed(Vec<usize>),
}

#[derive(Debug, Clone)]
pub struct SearchSpace {
    pub windows: Vec<usize>,
    pub matches: MatchStrategy,
    pub max_lens: Vec<usize>,
    /// `(guard_dictionary, guard_window)` combinations; the first one is used
    /// while climbing.
    pub guards: Vec<(bool, bool)>,
    pub time_budget: Option<Duration>,
    /// Worker threads; `None` uses `X3_THREADS` or all cores.
    pub threads: Option<usize>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            windows: (0..7).map(|k| 1024 << k).collect(),
            matches: MatchStrategy::HillClimb,
            max_lens: vec![64],
            guards: vec![(false, false), (true, false)],
            time_budget: None,
            threads: None,
        }
    }
}

impl SearchSpace {
    /// A space holding exactly one point.
    pub fn single(params: SearchParams) -> Self {
        Self {
            windows: vec![params.window_size],
            matches: MatchStrategy::Fixed(vec![params.max_matches]),
            max_lens: vec![params.max_match_len],
            guards: vec![(params.guard_dictionary, params.guard_window)],
            time_budget: None,
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let empty = |what: &str| Err(Error::InvalidParams(format!("search space has no {what}")));
        if self.windows.is_empty() {
            return empty("window sizes");
        }
        if self.max_lens.is_empty() {
            return empty("match lengths");
        }
        if self.guards.is_empty() {
            return empty("guard combinations");
        }
        match &self.matches {
            MatchStrategy::Fixed(v) if v.is_empty() => return empty("match counts"),
            MatchStrategy::Exhaustive { max: 0 } => return empty("match counts"),
            _ => {}
        }
        for &w in &self.windows {
            for &l in &self.max_lens {
                self.point(w, self.start_matches(w), l, self.guards[0]).validate()?;
            }
        }
        Ok(())
    }

    fn point(&self, window: usize, matches: usize, max_len: usize, guards: (bool, bool)) -> SearchParams {
        SearchParams {
            window_size: window,
            max_matches: matches,
            max_match_len: max_len,
            guard_dictionary: guards.0,
            guard_window: guards.1,
        }
    }

    fn start_matches(&self, window: usize) -> usize {
        match &self.matches {
            MatchStrategy::HillClimb => start_matches(window),
            MatchStrategy::Exhaustive { .. } => 1,
            MatchStrategy::Fixed(v) => v[0],
        }
    }
}

/// Starting match budget for a window: `max(1, round(28 * W / 8192))`.
pub fn start_matches(window: usize) -> usize {
    ((28 * window + 4096) / 8192).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub params: SearchParams,
    pub input_bytes: u64,
    pub compressed_bytes: u64,
    pub ratio: f64,
    pub seconds: f64,
}

impl TrialResult {
    /// Ordering used to pick winners: size, then window, match budget, guards, length.
    fn rank(&self) -> (u64, usize, usize, bool, bool, usize) {
        let p = &self.params;
        (
            self.compressed_bytes,
            p.window_size,
            p.max_matches,
            p.guard_dictionary,
            p.guard_window,
            p.max_match_len,
        )
    }
}

#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    pub best: TrialResult,
    /// Every evaluated point, sorted by parameters.
    pub trials: Vec<TrialResult>,
    /// True when the time budget cut the search short.
    pub partial: bool,
}

pub fn evaluate_point(input: &[u8], params: &SearchParams) -> Result<TrialResult> {
    let started = Instant::now();
    let out = compress(input, params)?;
    Ok(TrialResult {
        params: *params,
        input_bytes: input.len() as u64,
        compressed_bytes: out.len() as u64,
        ratio: ratio(input.len() as u64, out.len() as u64),
        seconds: started.elapsed().as_secs_f64(),
    })
}

fn thread_count(space: &SearchSpace) -> usize {
    space
        .threads
        .or_else(|| std::env::var("X3_THREADS").ok()?.parse().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

struct Trials<'a> {
    input: &'a [u8],
    cache: Mutex<HashMap<SearchParams, TrialResult>>,
    started: Instant,
    budget: Option<Duration>,
    evaluated: AtomicUsize,
    cut: AtomicBool,
}

impl Trials<'_> {
    /// Evaluates (or recalls) a point; `None` once the budget is spent.
    fn eval(&self, params: SearchParams) -> Result<Option<TrialResult>> {
        if let Some(hit) = self.cache.lock().unwrap().get(&params) {
            return Ok(Some(hit.clone()));
        }
        if let Some(budget) = self.budget {
            if self.started.elapsed() >= budget && self.evaluated.load(Ordering::SeqCst) > 0 {
                self.cut.store(true, Ordering::SeqCst);
                return Ok(None);
            }
        }
        let result = evaluate_point(self.input, &params)?;
        self.evaluated.fetch_add(1, Ordering::SeqCst);
        self.cache.lock().unwrap().insert(params, result.clone());
        Ok(Some(result))
    }

    fn eval_many(&self, points: Vec<SearchParams>) -> Result<Vec<TrialResult>> {
        let results: Vec<Option<TrialResult>> = points.into_par_iter().map(|p| self.eval(p)).collect::<Result<_>>()?;
        Ok(results.into_iter().flatten().collect())
    }
}

fn better(a: &TrialResult, b: &TrialResult) -> bool {
    a.rank() < b.rank()
}

fn best_of<'a>(items: impl IntoIterator<Item = &'a TrialResult>) -> Option<&'a TrialResult> {
    items.into_iter().min_by_key(|t| t.rank())
}

/// Search over one `(window, max_len)` cell.
fn search_cell(trials: &Trials<'_>, space: &SearchSpace, window: usize, max_len: usize) -> Result<()> {
    let climb_guards = space.guards[0];
    let at = |m: usize, g: (bool, bool)| space.point(window, m, max_len, g);
    let start = space.start_matches(window);

    let best_m = match &space.matches {
        MatchStrategy::Fixed(values) => {
            let pts = values
                .iter()
                .flat_map(|&m| space.guards.iter().map(move |&g| (m, g)))
                .map(|(m, g)| at(m, g))
                .collect();
            trials.eval_many(pts)?;
            return Ok(());
        }
        MatchStrategy::Exhaustive { max } => {
            let all = trials.eval_many((1..=*max).map(|m| at(m, climb_guards)).collect())?;
            best_of(&all).map(|t| t.params.max_matches)
        }
        MatchStrategy::HillClimb => {
            let Some(mut best) = trials.eval(at(start, climb_guards))? else {
                return Ok(());
            };
            let mut step = (start / 2).max(1);
            loop {
                let m = best.params.max_matches;
                let mut pts = vec![at(m + step, climb_guards)];
                if m > step {
                    pts.push(at(m - step, climb_guards));
                }
                let round = trials.eval_many(pts)?;
                match best_of(&round) {
                    Some(cand) if cand.compressed_bytes < best.compressed_bytes => best = cand.clone(),
                    _ if step == 1 || trials.cut.load(Ordering::SeqCst) => break,
                    _ => step /= 2,
                }
            }
            Some(best.params.max_matches)
        }
    };

    if let Some(m) = best_m {
        let mut pts = Vec::new();
        for &g in &space.guards[1..] {
            pts.push(at(m, g));
            pts.push(at(start, g));
        }
        trials.eval_many(pts)?;
    }
    Ok(())
}

pub fn optimize(input: &[u8], space: &SearchSpace) -> Result<OptimizeOutcome> {
    if input.is_empty() {
        return Err(Error::InvalidParams("cannot optimize an empty input".into()));
    }
    space.validate()?;
    let trials = Trials {
        input,
        cache: Mutex::new(HashMap::new()),
        started: Instant::now(),
        budget: space.time_budget,
        evaluated: AtomicUsize::new(0),
        cut: AtomicBool::new(false),
    };
    let cells: Vec<(usize, usize)> = space
        .windows
        .iter()
        .flat_map(|&w| space.max_lens.iter().map(move |&l| (w, l)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(space))
        .build()
        .map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?;
    pool.install(|| {
        cells
            .par_iter()
            .try_for_each(|&(w, l)| search_cell(&trials, space, w, l))
    })?;

    let mut log: Vec<TrialResult> = trials.cache.into_inner().unwrap().into_values().collect();
    log.sort_by_key(|t| t.params);
    let best = best_of(&log).cloned().expect("at least one trial is always evaluated");
    Ok(OptimizeOutcome {
        best,
        trials: log,
        partial: trials.cut.load(Ordering::SeqCst),
    })
}

/// Best trial per window size, in window order.
pub fn best_per_window(trials: &[TrialResult]) -> Vec<TrialResult> {
    let mut by_window: Vec<TrialResult> = Vec::new();
    for t in trials {
        match by_window
            .iter_mut()
            .find(|b| b.params.window_size == t.params.window_size)
        {
            Some(b) if better(t, b) => *b = t.clone(),
            Some(_) => {}
            None => by_window.push(t.clone()),
        }
    }
    by_window.sort_by_key(|t| t.params.window_size);
    by_window
}

pub fn write_trial_log<W: std::io::Write>(trials: &[TrialResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "window",
        "max_matches",
        "max_len",
        "guard_dict",
        "guard_window",
        "size",
        "compressed",
        "ratio",
        "seconds",
    ])
    .map_err(csv_err)?;
    for t in trials {
        let p = &t.params;
        w.write_record([
            p.window_size.to_string(),
            p.max_matches.to_string(),
            p.max_match_len.to_string(),
            on_off(p.guard_dictionary).into(),
            on_off(p.guard_window).into(),
            t.input_bytes.to_string(),
            t.compressed_bytes.to_string(),
            format!("{:.4}", t.ratio),
            format!("{:.3}", t.seconds),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub(crate) fn on_off(flag: bool) -> &'static str {
    if flag {
        "on"
    } else {
        "off"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn text(n: usize) -> Vec<u8> {
        let words = [
            "the ", "quick ", "brown ", "fox ", "jumps ", "over ", "lazy ", "dog ", "and ", "cat ",
        ];
        let mut x: u64 = 12345;
        let mut out = Vec::new();
        while out.len() < n {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            out.extend_from_slice(words[(x >> 33) as usize % words.len()].as_bytes());
        }
        out.truncate(n);
        out
    }

    #[test]
    fn start_budget_scales_with_window() {
        assert_eq!(start_matches(8192), 28);
        assert_eq!(start_matches(1024), 4);
        assert_eq!(start_matches(65536), 224);
        assert_eq!(start_matches(1), 1);
    }

    #[test]
    fn ratio_of_equal_sizes_is_one() {
        assert_eq!(ratio(100, 100), 1.0);
    }

    #[test]
    fn singleton_space_returns_its_point() {
        let data = text(5000);
        let p = SearchParams {
            window_size: 512,
            max_matches: 3,
            ..Default::default()
        };
        let out = optimize(&data, &SearchSpace::single(p)).unwrap();
        assert_eq!(out.best.params, p);
        assert_eq!(out.trials.len(), 1);
        assert!(!out.partial);
    }

    #[test]
    fn two_point_space_picks_smaller() {
        let data = text(8000);
        let mut space = SearchSpace::single(SearchParams::default());
        space.matches = MatchStrategy::Fixed(vec![1, 28]);
        let out = optimize(&data, &space).unwrap();
        let sizes: Vec<u64> = [1, 28]
            .iter()
            .map(|&m| {
                evaluate_point(
                    &data,
                    &SearchParams {
                        max_matches: m,
                        ..Default::default()
                    },
                )
                .unwrap()
                .compressed_bytes
            })
            .collect();
        assert_eq!(out.best.compressed_bytes, *sizes.iter().min().unwrap());
    }

    #[test]
    fn evaluation_is_repeatable() {
        let data = text(3000);
        let a = evaluate_point(&data, &SearchParams::default()).unwrap();
        let b = evaluate_point(&data, &SearchParams::default()).unwrap();
        assert_eq!(a.compressed_bytes, b.compressed_bytes);
    }

    #[test]
    fn never_worse_than_defaults_and_log_replays() {
        let data = text(20_000);
        let mut space = SearchSpace {
            windows: vec![1024, 8192],
            ..SearchSpace::default()
        };
        let out = optimize(&data, &space).unwrap();
        let default = evaluate_point(&data, &SearchParams::default()).unwrap();
        assert!(out.best.compressed_bytes <= default.compressed_bytes);
        for t in out.trials.iter().step_by(5) {
            assert_eq!(
                evaluate_point(&data, &t.params).unwrap().compressed_bytes,
                t.compressed_bytes
            );
        }
        // schedule-independent
        space.threads = Some(1);
        let serial = optimize(&data, &space).unwrap();
        assert_eq!(
            serial.best,
            TrialResult {
                seconds: serial.best.seconds,
                ..out.best.clone()
            }
        );
    }

    #[test]
    fn zero_budget_is_partial() {
        let data = text(4000);
        let space = SearchSpace {
            time_budget: Some(Duration::ZERO),
            threads: Some(1),
            ..SearchSpace::default()
        };
        let out = optimize(&data, &space).unwrap();
        assert!(out.partial);
        assert!(!out.trials.is_empty());
    }

    #[test]
    fn invalid_spaces() {
        assert!(optimize(b"", &SearchSpace::default()).is_err());
        let mut space = SearchSpace::default();
        space.windows.clear();
        assert!(optimize(b"abc", &space).is_err());
        let space = SearchSpace {
            matches: MatchStrategy::Fixed(vec![]),
            ..SearchSpace::default()
        };
        assert!(optimize(b"abc", &space).is_err());
    }

    #[test]
    fn trial_log_csv() {
        let data = text(2000);
        let t = evaluate_point(&data, &SearchParams::default()).unwrap();
        let mut buf = Vec::new();
        write_trial_log(std::slice::from_ref(&t), &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert_eq!(
            lines.next().unwrap(),
            "window,max_matches,max_len,guard_dict,guard_window,size,compressed,ratio,seconds"
        );
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row[..5], ["8192", "28", "64", "on", "off"]);
        assert_eq!(row[6], t.compressed_bytes.to_string());
    }
}
