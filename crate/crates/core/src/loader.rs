//! On-demand full-schema loading with LRU caching.
//!
//! The loader keeps promoted definitions out of resident prompt state:
//! schemas live in a registry (disk directory or remote server) and are
//! fetched when a routing pass promotes their tool. Hits refresh
//! recency; misses fetch, insert, and evict the least recently used
//! entry past capacity. Concurrent gets for the same id collapse into
//! one fetch; failures are never cached.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex};

use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error, Clone)]
pub enum LoadError {
    #[error("no schema for {0:?}")]
    MissingSchema(String),
    #[error("schema fetch failed: {0}")]
    FetchFailure(String),
}

/// Registry retrieval function: tool id to full serialized definition.
pub type Fetcher = Arc<dyn Fn(&str) -> Result<Value, LoadError> + Send + Sync>;

pub const DEFAULT_CACHE_CAPACITY: usize = 256;

struct CacheState {
    /// Recency order, least recent first.
    order: Vec<String>,
    entries: HashMap<String, Value>,
    in_flight: std::collections::HashSet<String>,
    hits: u64,
    misses: u64,
}

impl CacheState {
    fn touch(&mut self, tool_id: &str) {
        if let Some(pos) = self.order.iter().position(|id| id == tool_id) {
            let id = self.order.remove(pos);
            self.order.push(id);
        }
    }
}

/// LRU schema cache in front of a fetcher.
pub struct SchemaCache {
    capacity: usize,
    fetcher: Fetcher,
    state: Mutex<CacheState>,
    fetch_done: Condvar,
}

impl SchemaCache {
    pub fn new(fetcher: Fetcher, capacity: usize) -> Self {
        assert!(capacity >= 1, "cache needs capacity of at least 1");
        Self {
            capacity,
            fetcher,
            state: Mutex::new(CacheState {
                order: Vec::new(),
                entries: HashMap::new(),
                in_flight: std::collections::HashSet::new(),
                hits: 0,
                misses: 0,
            }),
            fetch_done: Condvar::new(),
        }
    }

    pub fn with_default_capacity(fetcher: Fetcher) -> Self {
        Self::new(fetcher, DEFAULT_CACHE_CAPACITY)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.state.lock().expect("cache lock").entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(hit_count, miss_count)`; the two always sum to the number of
    /// completed `get` calls.
    pub fn stats(&self) -> (u64, u64) {
        let s = self.state.lock().expect("cache lock");
        (s.hits, s.misses)
    }

    /// Cached ids in recency order, least recent first.
    pub fn recency_order(&self) -> Vec<String> {
        self.state.lock().expect("cache lock").order.clone()
    }

    /// Fetch-through get. At most one fetch per id runs at a time;
    /// concurrent callers for the same id wait for the winner's result.
    pub fn get(&self, tool_id: &str) -> Result<Value, LoadError> {
        let mut state = self.state.lock().expect("cache lock");
        loop {
            if let Some(doc) = state.entries.get(tool_id).cloned() {
                state.touch(tool_id);
                state.hits += 1;
                return Ok(doc);
            }
            if state.in_flight.contains(tool_id) {
                state = self.fetch_done.wait(state).expect("cache lock");
                continue;
            }
            state.in_flight.insert(tool_id.to_string());
            break;
        }
        drop(state);

        let fetched = (self.fetcher)(tool_id);

        let mut state = self.state.lock().expect("cache lock");
        state.in_flight.remove(tool_id);
        self.fetch_done.notify_all();
        match fetched {
            Ok(doc) => {
                state.misses += 1;
                state.entries.insert(tool_id.to_string(), doc.clone());
                state.order.push(tool_id.to_string());
                if state.entries.len() > self.capacity {
                    let evicted = state.order.remove(0);
                    state.entries.remove(&evicted);
                }
                Ok(doc)
            }
            Err(e) => Err(e),
        }
    }

    /// Drop a cached entry, e.g. after a registry update.
    pub fn invalidate(&self, tool_id: &str) {
        let mut state = self.state.lock().expect("cache lock");
        if state.entries.remove(tool_id).is_some() {
            state.order.retain(|id| id != tool_id);
        }
    }
}

/// Fetcher reading `<tool_id>.json` from a registry directory.
pub fn disk_fetcher(directory: &Path) -> Fetcher {
    let directory: PathBuf = directory.to_path_buf();
    Arc::new(move |tool_id: &str| {
        let path = directory.join(format!("{tool_id}.json"));
        if !path.exists() {
            return Err(LoadError::MissingSchema(tool_id.to_string()));
        }
        let text = std::fs::read_to_string(&path)
            .map_err(|e| LoadError::FetchFailure(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| LoadError::FetchFailure(format!("{}: {e}", path.display())))
    })
}

/// Fetcher issuing one JSON-RPC `tools/list` to a TCP endpoint and
/// serving every subsequent id from the cached listing.
pub fn remote_fetcher(endpoint: &str, session_id: &str) -> Fetcher {
    let endpoint = endpoint.to_string();
    let session_id = session_id.to_string();
    let listing: Arc<Mutex<Option<HashMap<String, Value>>>> = Arc::new(Mutex::new(None));
    Arc::new(move |tool_id: &str| {
        let mut cached = listing.lock().expect("listing lock");
        if cached.is_none() {
            *cached = Some(fetch_listing(&endpoint, &session_id)?);
        }
        cached
            .as_ref()
            .expect("listing populated")
            .get(tool_id)
            .cloned()
            .ok_or_else(|| LoadError::MissingSchema(tool_id.to_string()))
    })
}

fn fetch_listing(endpoint: &str, session_id: &str) -> Result<HashMap<String, Value>, LoadError> {
    use std::io::{BufRead, BufReader, Write};

    let stream = std::net::TcpStream::connect(endpoint)
        .map_err(|e| LoadError::FetchFailure(format!("connect {endpoint}: {e}")))?;
    let mut reader = BufReader::new(
        stream
            .try_clone()
            .map_err(|e| LoadError::FetchFailure(format!("clone stream: {e}")))?,
    );
    let mut writer = stream;
    let request = serde_json::json!({
        "jsonrpc": "2.0",
        "id": 1,
        "method": "tools/list",
        "params": {"session_id": session_id},
    });
    writer
        .write_all(format!("{request}\n").as_bytes())
        .map_err(|e| LoadError::FetchFailure(format!("write {endpoint}: {e}")))?;
    let mut line = String::new();
    reader
        .read_line(&mut line)
        .map_err(|e| LoadError::FetchFailure(format!("read {endpoint}: {e}")))?;
    let response: Value = serde_json::from_str(line.trim())
        .map_err(|e| LoadError::FetchFailure(format!("parse {endpoint}: {e}")))?;
    if let Some(err) = response.get("error") {
        return Err(LoadError::FetchFailure(format!("remote error: {err}")));
    }
    let tools = response
        .get("result")
        .and_then(|r| r.get("tools"))
        .and_then(Value::as_array)
        .ok_or_else(|| LoadError::FetchFailure("malformed tools/list result".into()))?;
    let mut map = HashMap::new();
    for entry in tools {
        let id = entry.get("id").and_then(Value::as_str);
        let definition = entry.get("definition");
        if let (Some(id), Some(def)) = (id, definition) {
            map.insert(id.to_string(), def.clone());
        }
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn counting_fetcher(calls: Arc<AtomicUsize>) -> Fetcher {
        Arc::new(move |tool_id: &str| {
            calls.fetch_add(1, Ordering::SeqCst);
            if tool_id.starts_with("missing") {
                Err(LoadError::MissingSchema(tool_id.to_string()))
            } else {
                Ok(serde_json::json!({"id": tool_id}))
            }
        })
    }

    #[test]
    fn lru_eviction_order() {
        let cache = SchemaCache::new(counting_fetcher(Arc::new(AtomicUsize::new(0))), 2);
        cache.get("A").unwrap();
        cache.get("B").unwrap();
        cache.get("A").unwrap(); // refresh A
        cache.get("C").unwrap(); // evicts B
        assert_eq!(cache.recency_order(), vec!["A", "C"]);
        let (hits, misses) = cache.stats();
        assert_eq!((hits, misses), (1, 3));
    }

    #[test]
    fn second_get_is_a_hit() {
        let calls = Arc::new(AtomicUsize::new(0));
        let cache = SchemaCache::new(counting_fetcher(Arc::clone(&calls)), 4);
        cache.get("A").unwrap();
        cache.get("A").unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 1);
        assert_eq!(cache.stats(), (1, 1));
    }

    #[test]
    fn unknown_id_is_missing_schema_and_not_cached() {
        let calls = Arc::new(AtomicUsize::new(0));
        let cache = SchemaCache::new(counting_fetcher(Arc::clone(&calls)), 4);
        for _ in 0..2 {
            match cache.get("missing_tool") {
                Err(LoadError::MissingSchema(id)) => assert_eq!(id, "missing_tool"),
                other => panic!("expected missing schema, got {other:?}"),
            }
        }
        // Failures hit the fetcher every time.
        assert_eq!(calls.load(Ordering::SeqCst), 2);
        assert_eq!(cache.stats(), (0, 0));
    }

    #[test]
    fn capacity_never_exceeded_on_random_trace() {
        use rand::{Rng, SeedableRng};
        let cache = SchemaCache::new(counting_fetcher(Arc::new(AtomicUsize::new(0))), 16);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut gets = 0u64;
        for _ in 0..10_000 {
            let id = format!("tool{}", rng.gen_range(0..64));
            cache.get(&id).unwrap();
            gets += 1;
            assert!(cache.len() <= 16);
        }
        let (hits, misses) = cache.stats();
        assert_eq!(hits + misses, gets);
    }

    #[test]
    fn matches_reference_lru_simulation() {
        use rand::{Rng, SeedableRng};
        let capacity = 8;
        let cache = SchemaCache::new(counting_fetcher(Arc::new(AtomicUsize::new(0))), capacity);
        // Reference simulation: vector of ids, most recent last.
        let mut reference: Vec<String> = Vec::new();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10_000 {
            let id = format!("t{}", rng.gen_range(0..32));
            cache.get(&id).unwrap();
            if let Some(pos) = reference.iter().position(|x| *x == id) {
                reference.remove(pos);
            }
            reference.push(id);
            if reference.len() > capacity {
                reference.remove(0);
            }
        }
        assert_eq!(cache.recency_order(), reference);
    }

    #[test]
    fn invalidate_forces_refetch() {
        let calls = Arc::new(AtomicUsize::new(0));
        let cache = SchemaCache::new(counting_fetcher(Arc::clone(&calls)), 4);
        cache.get("A").unwrap();
        cache.invalidate("A");
        cache.get("A").unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn concurrent_gets_for_one_id_fetch_once() {
        let calls = Arc::new(AtomicUsize::new(0));
        let slow_calls = Arc::clone(&calls);
        let fetcher: Fetcher = Arc::new(move |tool_id: &str| {
            slow_calls.fetch_add(1, Ordering::SeqCst);
            std::thread::sleep(std::time::Duration::from_millis(30));
            Ok(serde_json::json!({"id": tool_id}))
        });
        let cache = Arc::new(SchemaCache::new(fetcher, 4));
        let mut handles = Vec::new();
        for _ in 0..8 {
            let cache = Arc::clone(&cache);
            handles.push(std::thread::spawn(move || cache.get("shared").unwrap()));
        }
        for h in handles {
            h.join().unwrap();
        }
        assert_eq!(calls.load(Ordering::SeqCst), 1);
        let (hits, misses) = cache.stats();
        assert_eq!(hits + misses, 8);
        assert_eq!(misses, 1);
    }

    #[test]
    fn disk_fetcher_round_trips_registry_files() {
        let dir = tempfile::tempdir().unwrap();
        let doc = serde_json::json!({"id": "alpha", "schema": {"type": "object"}});
        std::fs::write(dir.path().join("alpha.json"), doc.to_string()).unwrap();
        let fetch = disk_fetcher(dir.path());
        assert_eq!(fetch("alpha").unwrap(), doc);
        assert!(matches!(
            fetch("beta").unwrap_err(),
            LoadError::MissingSchema(id) if id == "beta"
        ));
    }

    #[test]
    fn unreachable_remote_is_fetch_failure() {
        let fetch = remote_fetcher("127.0.0.1:1", "s");
        assert!(matches!(
            fetch("anything").unwrap_err(),
            LoadError::FetchFailure(_)
        ));
    }
}
