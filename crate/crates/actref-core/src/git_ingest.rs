//! Repository plumbing: enumerate commits and materialize the before/after
//! source file sets for each one by shelling out to `git`.
//!
//! Version-control rename metadata is deliberately ignored (`--no-renames`):
//! a relocated file appears as a delete of the old path plus an add of the
//! new path, and the detector has to rediscover the pairing itself.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::Command;

use crate::config::Config;
use crate::source_model::SourceFile;

#[derive(Debug)]
pub enum GitError {
    RepoNotFound(PathBuf),
    BadRevision(String),
    CommitNotFound(String),
    /// Merge commit encountered while merges are excluded.
    MultipleParents(String),
    /// git itself failed; carries the command and its stderr.
    GitFailed(String, String),
    Io(std::io::Error),
}

impl fmt::Display for GitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GitError::RepoNotFound(p) => write!(f, "not a git repository: {}", p.display()),
            GitError::BadRevision(r) => write!(f, "bad revision or range: {r}"),
            GitError::CommitNotFound(c) => write!(f, "commit not found: {c}"),
            GitError::MultipleParents(c) => {
                write!(f, "merge commit {c} skipped (use --include-merges)")
            }
            GitError::GitFailed(cmd, err) => write!(f, "git {cmd} failed: {}", err.trim()),
            GitError::Io(e) => write!(f, "i/o error running git: {e}"),
        }
    }
}

impl std::error::Error for GitError {}

impl From<std::io::Error> for GitError {
    fn from(e: std::io::Error) -> Self {
        GitError::Io(e)
    }
}

/// Which commits of the repository to analyze.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CommitSelection {
    /// Every commit reachable from HEAD.
    All,
    /// A git revision range (anything `git rev-list` accepts).
    Range(String),
    /// An explicit list of commit hashes, analyzed in the given order.
    Explicit(Vec<String>),
}

impl CommitSelection {
    /// Parse the CLI form: `all`, `@file` (one hash per line, `#` comments),
    /// or a revision range.
    pub fn parse(arg: &str) -> Result<Self, GitError> {
        if arg == "all" {
            return Ok(CommitSelection::All);
        }
        if let Some(file) = arg.strip_prefix('@') {
            let text = std::fs::read_to_string(file)?;
            let hashes: Vec<String> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_string)
                .collect();
            return Ok(CommitSelection::Explicit(hashes));
        }
        Ok(CommitSelection::Range(arg.to_string()))
    }
}

/// The changed source files of one commit, before and after.
#[derive(Debug, Clone)]
pub struct CommitFileSets {
    pub commit: String,
    pub parent: String,
    pub before_set: Vec<SourceFile>,
    pub after_set: Vec<SourceFile>,
    /// Skipped or unreadable paths, as (path, reason).
    pub diagnostics: Vec<(String, String)>,
}

fn run_git(repo: &Path, args: &[&str]) -> Result<String, GitError> {
    let out = Command::new("git")
        .arg("-C")
        .arg(repo)
        .args(args)
        .output()?;
    if out.status.success() {
        return Ok(String::from_utf8_lossy(&out.stdout).into_owned());
    }
    let err = String::from_utf8_lossy(&out.stderr).into_owned();
    if err.contains("not a git repository") {
        return Err(GitError::RepoNotFound(repo.to_path_buf()));
    }
    Err(GitError::GitFailed(args.join(" "), err))
}

/// Commits matching `selection`, oldest first, merges excluded unless
/// `include_merges`.
pub fn enumerate_commits(
    repo: &Path,
    selection: &CommitSelection,
    include_merges: bool,
) -> Result<Vec<String>, GitError> {
    if !repo.join(".git").exists() && run_git(repo, &["rev-parse", "--git-dir"]).is_err() {
        return Err(GitError::RepoNotFound(repo.to_path_buf()));
    }
    match selection {
        CommitSelection::Explicit(hashes) => {
            let mut out = Vec::new();
            for h in hashes {
                let full = run_git(repo, &["rev-parse", "--verify", &format!("{h}^{{commit}}")])
                    .map_err(|_| GitError::CommitNotFound(h.clone()))?;
                out.push(full.trim().to_string());
            }
            Ok(out)
        }
        CommitSelection::All | CommitSelection::Range(_) => {
            let mut args = vec!["rev-list", "--topo-order", "--reverse"];
            if !include_merges {
                args.push("--no-merges");
            }
            let range = match selection {
                CommitSelection::Range(r) => r.as_str(),
                _ => "HEAD",
            };
            args.push(range);
            let text = run_git(repo, &args)
                .map_err(|e| match e {
                    GitError::GitFailed(_, _) => GitError::BadRevision(range.to_string()),
                    other => other,
                })?;
            Ok(text.lines().map(str::to_string).collect())
        }
    }
}

/// Materialize the changed source files of `commit` from the repository.
pub fn commit_filesets(
    repo: &Path,
    commit: &str,
    cfg: &Config,
    include_merges: bool,
) -> Result<CommitFileSets, GitError> {
    let full = run_git(repo, &["rev-parse", "--verify", &format!("{commit}^{{commit}}")])
        .map_err(|_| GitError::CommitNotFound(commit.to_string()))?;
    let full = full.trim().to_string();

    let parents_text = run_git(repo, &["rev-list", "--parents", "-n", "1", &full])?;
    let parents: Vec<&str> = parents_text.split_whitespace().skip(1).collect();
    if parents.len() > 1 && !include_merges {
        return Err(GitError::MultipleParents(full));
    }
    let parent = parents.first().copied().unwrap_or("").to_string();

    // --no-renames: relocations surface as delete + add with no pairing hint
    let mut args = vec!["diff-tree", "-r", "--no-renames", "--name-status"];
    if parent.is_empty() {
        args.push("--root");
    }
    args.push(&full);
    let diff = run_git(repo, &args)?;

    let mut sets = CommitFileSets {
        commit: full.clone(),
        parent: parent.clone(),
        before_set: Vec::new(),
        after_set: Vec::new(),
        diagnostics: Vec::new(),
    };
    for line in diff.lines() {
        let mut cols = line.split('\t');
        let (Some(status), Some(path)) = (cols.next(), cols.next()) else {
            continue;
        };
        if !path.ends_with(&cfg.source_suffix) {
            continue;
        }
        let status = status.chars().next().unwrap_or(' ');
        let want_before = status == 'M' || status == 'D';
        let want_after = status == 'M' || status == 'A';
        if want_before {
            match materialize(repo, &parent, path, cfg) {
                Ok(Some(f)) => sets.before_set.push(f),
                Ok(None) => sets
                    .diagnostics
                    .push((path.to_string(), "skipped: larger than max_file_bytes".into())),
                Err(e) => sets.diagnostics.push((path.to_string(), e.to_string())),
            }
        }
        if want_after {
            match materialize(repo, &full, path, cfg) {
                Ok(Some(f)) => sets.after_set.push(f),
                Ok(None) => sets
                    .diagnostics
                    .push((path.to_string(), "skipped: larger than max_file_bytes".into())),
                Err(e) => sets.diagnostics.push((path.to_string(), e.to_string())),
            }
        }
    }
    sets.before_set.sort_by(|a, b| a.path.cmp(&b.path));
    sets.after_set.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(sets)
}

/// Read one file at one revision; `None` when it exceeds the size guardrail.
fn materialize(
    repo: &Path,
    rev: &str,
    path: &str,
    cfg: &Config,
) -> Result<Option<SourceFile>, GitError> {
    let text = run_git(repo, &["show", &format!("{rev}:{path}")])?;
    if text.len() > cfg.max_file_bytes {
        return Ok(None);
    }
    Ok(Some(SourceFile::new(path, text.replace("\r\n", "\n"))))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sh(repo: &Path, script: &str) {
        let out = Command::new("sh")
            .arg("-c")
            .arg(script)
            .current_dir(repo)
            .env("GIT_AUTHOR_NAME", "t")
            .env("GIT_AUTHOR_EMAIL", "t@t")
            .env("GIT_COMMITTER_NAME", "t")
            .env("GIT_COMMITTER_EMAIL", "t@t")
            .output()
            .expect("run script");
        assert!(
            out.status.success(),
            "script failed: {}\n{}",
            script,
            String::from_utf8_lossy(&out.stderr)
        );
    }

    fn temp_repo(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("actref-git-{name}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        sh(&dir, "git init -q -b main .");
        dir
    }

    #[test]
    fn linear_range_oldest_first() {
        let repo = temp_repo("linear");
        sh(&repo, "echo 'x = 1' > a.py && git add . && git commit -qm one");
        sh(&repo, "echo 'x = 2' > a.py && git commit -qam two");
        sh(&repo, "echo 'x = 3' > a.py && git commit -qam three");
        let all =
            enumerate_commits(&repo, &CommitSelection::All, false).unwrap();
        assert_eq!(all.len(), 3);
        let msg = run_git(&repo, &["log", "--format=%s", "-n", "1", &all[0]]).unwrap();
        assert_eq!(msg.trim(), "one");
        let range = enumerate_commits(
            &repo,
            &CommitSelection::Range(format!("{}..{}", all[0], all[2])),
            false,
        )
        .unwrap();
        assert_eq!(range, all[1..].to_vec());
        std::fs::remove_dir_all(&repo).ok();
    }

    #[test]
    fn merges_excluded_by_default() {
        let repo = temp_repo("merge");
        sh(&repo, "echo 'x = 1' > a.py && git add . && git commit -qm base");
        sh(&repo, "git checkout -qb side && echo 'y = 1' > b.py && git add . && git commit -qm side");
        sh(&repo, "git checkout -q main && echo 'z = 1' > c.py && git add . && git commit -qm main2");
        sh(&repo, "git merge -q --no-ff -m merged side");
        let no_merges = enumerate_commits(&repo, &CommitSelection::All, false).unwrap();
        let with_merges = enumerate_commits(&repo, &CommitSelection::All, true).unwrap();
        assert_eq!(no_merges.len(), 3);
        assert_eq!(with_merges.len(), 4);
        let merge = with_merges.last().unwrap();
        assert!(matches!(
            commit_filesets(&repo, merge, &Config::default(), false),
            Err(GitError::MultipleParents(_))
        ));
        std::fs::remove_dir_all(&repo).ok();
    }

    #[test]
    fn filesets_for_modify_add_delete() {
        let repo = temp_repo("fsets");
        sh(
            &repo,
            "printf 'def f():\\n    return 1\\n' > a.py && echo 'q = 1' > old.py \
             && echo notes > readme.txt && git add . && git commit -qm one",
        );
        sh(
            &repo,
            "printf 'def f():\\n    return 2\\n' > a.py && rm old.py && echo 'w = 2' > new.py \
             && echo more > readme.txt && git add -A && git commit -qm two",
        );
        let all = enumerate_commits(&repo, &CommitSelection::All, false).unwrap();
        let sets = commit_filesets(&repo, &all[1], &Config::default(), false).unwrap();
        let before: Vec<&str> = sets.before_set.iter().map(|f| f.path.as_str()).collect();
        let after: Vec<&str> = sets.after_set.iter().map(|f| f.path.as_str()).collect();
        // non-source readme.txt excluded; unchanged files excluded
        assert_eq!(before, ["a.py", "old.py"]);
        assert_eq!(after, ["a.py", "new.py"]);
        assert!(sets.after_set[0].content.contains("return 2"));
        assert!(sets.before_set[0].content.contains("return 1"));
        std::fs::remove_dir_all(&repo).ok();
    }

    #[test]
    fn root_commit_has_empty_before_set() {
        let repo = temp_repo("root");
        sh(&repo, "echo 'x = 1' > a.py && git add . && git commit -qm one");
        let all = enumerate_commits(&repo, &CommitSelection::All, false).unwrap();
        let sets = commit_filesets(&repo, &all[0], &Config::default(), false).unwrap();
        assert!(sets.before_set.is_empty());
        assert_eq!(sets.after_set.len(), 1);
        assert_eq!(sets.parent, "");
        std::fs::remove_dir_all(&repo).ok();
    }

    #[test]
    fn renamed_file_carries_no_pairing_hint() {
        let repo = temp_repo("rename");
        sh(
            &repo,
            "mkdir -p pkg && printf 'def f():\\n    return 1\\n' > pkg/a.py \
             && git add . && git commit -qm one",
        );
        sh(&repo, "git mv pkg/a.py pkg/b.py && git commit -qm two");
        let all = enumerate_commits(&repo, &CommitSelection::All, false).unwrap();
        let sets = commit_filesets(&repo, &all[1], &Config::default(), false).unwrap();
        // the rename surfaces as delete + add; no hint links the two paths
        assert_eq!(sets.before_set.len(), 1);
        assert_eq!(sets.after_set.len(), 1);
        assert_eq!(sets.before_set[0].path, "pkg/a.py");
        assert_eq!(sets.after_set[0].path, "pkg/b.py");
        assert_eq!(sets.before_set[0].content, sets.after_set[0].content);
        std::fs::remove_dir_all(&repo).ok();
    }

    #[test]
    fn oversized_file_skipped_with_diagnostic() {
        let repo = temp_repo("big");
        sh(&repo, "echo 'x = 1' > a.py && git add . && git commit -qm one");
        sh(&repo, "echo 'x = 2' > a.py && git commit -qam two");
        let all = enumerate_commits(&repo, &CommitSelection::All, false).unwrap();
        let mut cfg = Config::default();
        cfg.max_file_bytes = 3;
        let sets = commit_filesets(&repo, &all[1], &cfg, false).unwrap();
        assert!(sets.before_set.is_empty() && sets.after_set.is_empty());
        assert_eq!(sets.diagnostics.len(), 2);
        assert!(sets.diagnostics[0].1.contains("max_file_bytes"));
        std::fs::remove_dir_all(&repo).ok();
    }

    #[test]
    fn errors_surface_cleanly() {
        let missing = std::env::temp_dir().join("actref-no-such-repo");
        assert!(matches!(
            enumerate_commits(&missing, &CommitSelection::All, false),
            Err(GitError::RepoNotFound(_))
        ));
        let repo = temp_repo("errs");
        sh(&repo, "echo 'x = 1' > a.py && git add . && git commit -qm one");
        assert!(matches!(
            enumerate_commits(&repo, &CommitSelection::Range("no..pe".into()), false),
            Err(GitError::BadRevision(_))
        ));
        assert!(matches!(
            commit_filesets(&repo, "deadbeef", &Config::default(), false),
            Err(GitError::CommitNotFound(_))
        ));
        std::fs::remove_dir_all(&repo).ok();
    }

    #[test]
    fn explicit_selection_from_file() {
        let repo = temp_repo("explicit");
        sh(&repo, "echo 'x = 1' > a.py && git add . && git commit -qm one");
        sh(&repo, "echo 'x = 2' > a.py && git commit -qam two");
        let all = enumerate_commits(&repo, &CommitSelection::All, false).unwrap();
        let list = repo.join("hashes.txt");
        std::fs::write(&list, format!("# newest first on purpose\n{}\n{}\n", all[1], all[0]))
            .unwrap();
        let sel = CommitSelection::parse(&format!("@{}", list.display())).unwrap();
        let picked = enumerate_commits(&repo, &sel, false).unwrap();
        assert_eq!(picked, vec![all[1].clone(), all[0].clone()]);
        std::fs::remove_dir_all(&repo).ok();
    }
}
