//! JSON-RPC 2.0 gateway applying per-session tool gating at the wire.
//!
//! The gateway fronts a schema registry as an MCP-style server: hosts
//! see the summary pool for every tool but full definitions only for
//! their session's current active set. Because `tools/list` carries no
//! query, the `attention/route` extension method supplies it; calling a
//! tool that was never routed active this turn returns the structured
//! `tool_not_available` document.
//!
//! Framing is newline-delimited JSON-RPC 2.0 over stdio or TCP. Requests
//! serialize through the session table lock, which also gives in-order
//! processing within a session.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use crate::attention::{rejection_document, AttentionResult, EventSink, ToolAttention};
use crate::catalog::{load_registry, CatalogError};
use crate::embed::Encoder;
use crate::index::VectorStore;
use crate::loader::{disk_fetcher, SchemaCache};
use crate::router::RouterConfig;
use crate::state::AgentState;
use crate::tokens::TokenCounter;

pub const PARSE_ERROR: i64 = -32700;
pub const METHOD_NOT_FOUND: i64 = -32601;
pub const INVALID_PARAMS: i64 = -32602;
pub const INTERNAL_ERROR: i64 = -32603;

pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(30 * 60);

/// Executes an admitted tool call. The default echoes the arguments
/// back; the gateway gates calls, it does not implement tools.
pub type ToolExecutor = Arc<dyn Fn(&str, &Value) -> Value + Send + Sync>;

pub fn echo_executor() -> ToolExecutor {
    Arc::new(|name: &str, arguments: &Value| json!({ "tool": name, "echo": arguments }))
}

/// One host session: its agent state and the last routing outcome,
/// which is the only set `tools/call` admits.
pub struct Session {
    pub session_id: String,
    pub agent_state: AgentState,
    pub last_result: Option<AttentionResult>,
    pub created_at: Instant,
    last_seen: Instant,
}

impl Session {
    fn new(session_id: &str) -> Self {
        let now = Instant::now();
        Self {
            session_id: session_id.to_string(),
            agent_state: AgentState::new(),
            last_result: None,
            created_at: now,
            last_seen: now,
        }
    }

    fn active_ids(&self) -> Vec<String> {
        self.last_result
            .as_ref()
            .map(|r| r.active_ids())
            .unwrap_or_default()
    }
}

pub struct Gateway {
    attention: ToolAttention,
    sessions: Mutex<HashMap<String, Session>>,
    executor: ToolExecutor,
    idle_timeout: Duration,
}

impl Gateway {
    pub fn new(attention: ToolAttention) -> Self {
        Self {
            attention,
            sessions: Mutex::new(HashMap::new()),
            executor: echo_executor(),
            idle_timeout: DEFAULT_IDLE_TIMEOUT,
        }
    }

    /// Load a registry directory and assemble the full stack behind a
    /// gateway.
    pub fn from_registry(
        registry: &Path,
        config: RouterConfig,
        counter: Arc<TokenCounter>,
        encoder: Arc<Encoder>,
        sink: Arc<EventSink>,
    ) -> Result<Self, CatalogError> {
        let catalog = Arc::new(load_registry(registry)?);
        let mut store = VectorStore::new(encoder.dim());
        let ordered: Vec<_> = catalog.summaries_in_order().into_iter().cloned().collect();
        store
            .add_tools(&ordered, &encoder)
            .map_err(|e| CatalogError::InvalidCatalog(e.to_string()))?;
        let loader = Arc::new(SchemaCache::with_default_capacity(disk_fetcher(registry)));
        let attention = ToolAttention::new(catalog, Arc::new(store), loader, encoder, counter)
            .with_config(config)
            .with_event_sink(sink);
        Ok(Self::new(attention))
    }

    pub fn with_executor(mut self, executor: ToolExecutor) -> Self {
        self.executor = executor;
        self
    }

    pub fn with_idle_timeout(mut self, idle_timeout: Duration) -> Self {
        self.idle_timeout = idle_timeout;
        self
    }

    /// Handle one raw request line; `None` for notifications.
    pub fn handle_line(&self, line: &str) -> Option<String> {
        let parsed: Result<Value, _> = serde_json::from_str(line);
        let request = match parsed {
            Ok(v) => v,
            Err(e) => {
                return Some(
                    error_response(Value::Null, PARSE_ERROR, &format!("parse error: {e}"))
                        .to_string(),
                )
            }
        };
        let id = request.get("id").cloned();
        let envelope_ok = request.get("jsonrpc").and_then(Value::as_str) == Some("2.0")
            && request.get("method").is_some_and(Value::is_string);
        if !envelope_ok {
            return Some(
                error_response(
                    id.unwrap_or(Value::Null),
                    PARSE_ERROR,
                    "malformed JSON-RPC 2.0 envelope",
                )
                .to_string(),
            );
        }
        let method = request["method"].as_str().expect("checked above");
        let params = request.get("params").cloned().unwrap_or(json!({}));
        let outcome = self.dispatch(method, &params);
        let id = id?; // notifications get no response
        let response = match outcome {
            Ok(result) => success_response(id, result),
            Err((code, message)) => error_response(id, code, &message),
        };
        Some(response.to_string())
    }

    fn dispatch(&self, method: &str, params: &Value) -> Result<Value, (i64, String)> {
        self.purge_idle_sessions();
        match method {
            "initialize" => Ok(self.handle_initialize()),
            "attention/route" => self.handle_route(params),
            "tools/list" => self.handle_tools_list(params),
            "tools/call" => self.handle_tools_call(params),
            other => Err((METHOD_NOT_FOUND, format!("method not found: {other}"))),
        }
    }

    fn handle_initialize(&self) -> Value {
        let catalog = self.attention.catalog();
        json!({
            "serverInfo": {
                "name": "tool-attention-gateway",
                "version": env!("CARGO_PKG_VERSION"),
            },
            "tools": catalog.tools.len(),
            "servers": catalog.servers().len(),
        })
    }

    fn handle_route(&self, params: &Value) -> Result<Value, (i64, String)> {
        let session_id = required_str(params, "session_id")?;
        let query = required_str(params, "query")?;

        let mut sessions = self.sessions.lock().expect("session lock");
        let session = sessions
            .entry(session_id.to_string())
            .or_insert_with(|| Session::new(session_id));
        session.last_seen = Instant::now();
        if let Some(patch) = params.get("state_patch") {
            apply_state_patch(&mut session.agent_state, patch).map_err(|e| (INVALID_PARAMS, e))?;
        }

        let (result, _prompt, _event) = self
            .attention
            .before_model(query, &session.agent_state)
            .map_err(|e| (INTERNAL_ERROR, e.to_string()))?;
        session.agent_state = session.agent_state.next_turn();
        let response = json!({
            "active": result.active,
            "phase1_tokens": result.phase1_tokens,
            "phase2_tokens": result.phase2_tokens,
        });
        session.last_result = Some(result);
        Ok(response)
    }

    fn handle_tools_list(&self, params: &Value) -> Result<Value, (i64, String)> {
        let session_id = required_str(params, "session_id")?;
        let mut sessions = self.sessions.lock().expect("session lock");
        let session = sessions
            .get_mut(session_id)
            .ok_or_else(|| (INVALID_PARAMS, format!("unknown session {session_id:?}")))?;
        session.last_seen = Instant::now();
        let active = session.active_ids();

        let catalog = self.attention.catalog();
        let mut tools = Vec::with_capacity(catalog.tools.len());
        for tool in &catalog.tools {
            let summary = catalog
                .summaries
                .get(&tool.id)
                .map(|s| s.text.clone())
                .unwrap_or_default();
            let mut entry = json!({ "id": tool.id, "summary": summary });
            if active.contains(&tool.id) {
                entry["definition"] = serde_json::to_value(tool).expect("tool serializes");
            }
            tools.push(entry);
        }
        Ok(json!({ "tools": tools }))
    }

    fn handle_tools_call(&self, params: &Value) -> Result<Value, (i64, String)> {
        let session_id = required_str(params, "session_id")?;
        let name = required_str(params, "name")?;
        let arguments = params.get("arguments").cloned().unwrap_or(json!({}));

        let mut sessions = self.sessions.lock().expect("session lock");
        let session = sessions
            .get_mut(session_id)
            .ok_or_else(|| (INVALID_PARAMS, format!("unknown session {session_id:?}")))?;
        session.last_seen = Instant::now();
        let active = session.active_ids();

        if !active.iter().any(|id| id == name) {
            // Rejection is a result, not a protocol failure.
            return Ok(rejection_document(&active));
        }
        session.agent_state = session.agent_state.record_tool_result(name, true);
        Ok((self.executor)(name, &arguments))
    }

    fn purge_idle_sessions(&self) {
        let mut sessions = self.sessions.lock().expect("session lock");
        let timeout = self.idle_timeout;
        sessions.retain(|_, s| s.last_seen.elapsed() < timeout);
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("session lock").len()
    }
}

fn required_str<'v>(params: &'v Value, key: &str) -> Result<&'v str, (i64, String)> {
    params
        .get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| (INVALID_PARAMS, format!("missing string param {key:?}")))
}

fn apply_state_patch(state: &mut AgentState, patch: &Value) -> Result<(), String> {
    if !patch.is_object() {
        return Err("state_patch must be an object".into());
    }
    if let Some(scopes) = patch.get("auth_scopes") {
        let scopes = scopes
            .as_array()
            .ok_or_else(|| "auth_scopes must be an array".to_string())?;
        for s in scopes {
            let s = s
                .as_str()
                .ok_or_else(|| "auth_scopes entries must be strings".to_string())?;
            state.auth_scopes.insert(s.to_string());
        }
    }
    if let Some(milestones) = patch.get("milestones") {
        let milestones = milestones
            .as_array()
            .ok_or_else(|| "milestones must be an array".to_string())?;
        for m in milestones {
            let m = m
                .as_str()
                .ok_or_else(|| "milestones entries must be strings".to_string())?;
            state.milestones.insert(m.to_string());
        }
    }
    if let Some(results) = patch.get("tool_results") {
        let results = results
            .as_array()
            .ok_or_else(|| "tool_results must be an array".to_string())?;
        for r in results {
            let tool_id = r
                .get("tool_id")
                .and_then(Value::as_str)
                .ok_or_else(|| "tool_results entries need a tool_id".to_string())?;
            let success = r.get("success").and_then(Value::as_bool).unwrap_or(true);
            *state = state.record_tool_result(tool_id, success);
        }
    }
    Ok(())
}

fn success_response(id: Value, result: Value) -> Value {
    json!({ "jsonrpc": "2.0", "id": id, "result": result })
}

fn error_response(id: Value, code: i64, message: &str) -> Value {
    json!({ "jsonrpc": "2.0", "id": id, "error": { "code": code, "message": message } })
}

/// Serve newline-delimited JSON-RPC over stdio until EOF.
pub fn serve_stdio(gateway: &Gateway) -> std::io::Result<()> {
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for line in stdin.lock().lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if let Some(response) = gateway.handle_line(&line) {
            writeln!(out, "{response}")?;
            out.flush()?;
        }
    }
    Ok(())
}

/// Bind a TCP listener and serve each connection on its own thread.
/// Returns the bound address; the accept loop runs until the process
/// exits.
pub fn spawn_tcp(gateway: Arc<Gateway>, addr: &str) -> std::io::Result<SocketAddr> {
    let listener = TcpListener::bind(addr)?;
    let local = listener.local_addr()?;
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            match stream {
                Ok(stream) => {
                    let gateway = Arc::clone(&gateway);
                    std::thread::spawn(move || {
                        let _ = serve_connection(&gateway, stream);
                    });
                }
                Err(_) => break,
            }
        }
    });
    Ok(local)
}

fn serve_connection(gateway: &Gateway, stream: TcpStream) -> std::io::Result<()> {
    let mut writer = stream.try_clone()?;
    let reader = BufReader::new(stream);
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if let Some(response) = gateway.handle_line(&line) {
            writer.write_all(response.as_bytes())?;
            writer.write_all(b"\n")?;
            writer.flush()?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{default_specs, generate_testbed, save_registry, DEFAULT_TARGET_TOKENS};

    fn test_gateway(dir: &Path) -> Gateway {
        let counter = TokenCounter::heuristic();
        let catalog =
            generate_testbed(&default_specs(), DEFAULT_TARGET_TOKENS, 42, &counter).unwrap();
        save_registry(&catalog, dir).unwrap();
        Gateway::from_registry(
            dir,
            RouterConfig::default(),
            counter,
            Encoder::hashed_ngram(384, 42),
            Arc::new(EventSink::Null),
        )
        .unwrap()
    }

    fn call(gateway: &Gateway, method: &str, params: Value) -> Value {
        let request = json!({"jsonrpc": "2.0", "id": 1, "method": method, "params": params});
        let response = gateway.handle_line(&request.to_string()).expect("response");
        serde_json::from_str(&response).unwrap()
    }

    fn route_params(session: &str, query: &str) -> Value {
        json!({
            "session_id": session,
            "query": query,
            "state_patch": {"auth_scopes": [
                "github:write", "filesystem:write", "database:write",
                "slack:write", "web:write", "jira:write"
            ]},
        })
    }

    #[test]
    fn initialize_reports_catalog_stats() {
        let dir = tempfile::tempdir().unwrap();
        let gateway = test_gateway(dir.path());
        let response = call(&gateway, "initialize", json!({}));
        assert_eq!(response["result"]["tools"], 120);
        assert_eq!(response["result"]["servers"], 6);
        assert_eq!(response["id"], 1);
        assert!(response.get("error").is_none());
    }

    #[test]
    fn unknown_method_is_32601() {
        let dir = tempfile::tempdir().unwrap();
        let gateway = test_gateway(dir.path());
        let response = call(&gateway, "tools/write", json!({}));
        assert_eq!(response["error"]["code"], -32601);
        assert!(response.get("result").is_none());
    }

    #[test]
    fn parse_error_is_32700() {
        let dir = tempfile::tempdir().unwrap();
        let gateway = test_gateway(dir.path());
        let response: Value =
            serde_json::from_str(&gateway.handle_line("{this is not json").unwrap()).unwrap();
        assert_eq!(response["error"]["code"], -32700);
        let response: Value = serde_json::from_str(
            &gateway
                .handle_line(&json!({"id": 5, "method": "initialize"}).to_string())
                .unwrap(),
        )
        .unwrap();
        assert_eq!(response["error"]["code"], -32700);
    }

    #[test]
    fn list_before_route_and_unknown_session() {
        let dir = tempfile::tempdir().unwrap();
        let gateway = test_gateway(dir.path());
        let response = call(&gateway, "tools/list", json!({"session_id": "ghost"}));
        assert_eq!(response["error"]["code"], -32602);

        // A routed session with an empty result still lists summaries
        // with no definitions.
        call(
            &gateway,
            "attention/route",
            route_params("s1", "zzz qqq unrelated"),
        );
        let listing = call(&gateway, "tools/list", json!({"session_id": "s1"}));
        let tools = listing["result"]["tools"].as_array().unwrap();
        assert_eq!(tools.len(), 120);
    }

    #[test]
    fn route_then_list_exposes_definitions_for_active_only() {
        let dir = tempfile::tempdir().unwrap();
        let gateway = test_gateway(dir.path());
        let routed = call(
            &gateway,
            "attention/route",
            route_params("s1", "search github issues by label"),
        );
        let active: Vec<String> = routed["result"]["active"]
            .as_array()
            .unwrap()
            .iter()
            .map(|r| r["tool_id"].as_str().unwrap().to_string())
            .collect();
        assert!(!active.is_empty());
        assert!(routed["result"]["phase1_tokens"].as_u64().unwrap() > 0);

        let listing = call(&gateway, "tools/list", json!({"session_id": "s1"}));
        for entry in listing["result"]["tools"].as_array().unwrap() {
            let id = entry["id"].as_str().unwrap();
            let has_definition = entry.get("definition").is_some();
            assert_eq!(
                has_definition,
                active.contains(&id.to_string()),
                "definition exposure mismatch for {id}"
            );
        }
    }

    #[test]
    fn call_outside_active_set_returns_rejection_result() {
        let dir = tempfile::tempdir().unwrap();
        let gateway = test_gateway(dir.path());
        call(
            &gateway,
            "attention/route",
            route_params("s1", "search github issues by label"),
        );
        let response = call(
            &gateway,
            "tools/call",
            json!({"session_id": "s1", "name": "not_a_real_tool", "arguments": {}}),
        );
        assert_eq!(response["result"]["error"], "tool_not_available");
        assert!(response["result"]["available"].is_array());

        // Before any route, everything is unavailable.
        let fresh = call(
            &gateway,
            "attention/route",
            route_params("s2", "search github issues by label"),
        );
        let first_active = fresh["result"]["active"][0]["tool_id"].as_str().unwrap();
        let ok = call(
            &gateway,
            "tools/call",
            json!({"session_id": "s2", "name": first_active, "arguments": {"x": 1}}),
        );
        assert_eq!(ok["result"]["tool"], first_active);
        assert_eq!(ok["result"]["echo"]["x"], 1);
    }

    #[test]
    fn unrouted_session_sees_empty_active_set() {
        let dir = tempfile::tempdir().unwrap();
        let gateway = test_gateway(dir.path());
        // A malformed patch creates the session but fails the route, so
        // the session exists with no routing result.
        let response = call(
            &gateway,
            "attention/route",
            json!({"session_id": "early", "query": "x", "state_patch": "not an object"}),
        );
        assert_eq!(response["error"]["code"], -32602);
        assert_eq!(gateway.session_count(), 1);

        let listing = call(&gateway, "tools/list", json!({"session_id": "early"}));
        for entry in listing["result"]["tools"].as_array().unwrap() {
            assert!(entry.get("definition").is_none());
        }
        let rejected = call(
            &gateway,
            "tools/call",
            json!({"session_id": "early", "name": "anything", "arguments": {}}),
        );
        assert_eq!(rejected["result"]["error"], "tool_not_available");
        assert_eq!(rejected["result"]["available"], json!([]));
    }

    #[test]
    fn sessions_are_isolated() {
        let dir = tempfile::tempdir().unwrap();
        let gateway = test_gateway(dir.path());
        call(
            &gateway,
            "attention/route",
            route_params("a", "search github issues by label"),
        );
        call(
            &gateway,
            "attention/route",
            route_params("b", "zzz qqq unrelated"),
        );
        let listing_b = call(&gateway, "tools/list", json!({"session_id": "b"}));
        for entry in listing_b["result"]["tools"].as_array().unwrap() {
            assert!(
                entry.get("definition").is_none(),
                "session b leaked a definition for {}",
                entry["id"]
            );
        }
    }

    #[test]
    fn idle_sessions_expire() {
        let dir = tempfile::tempdir().unwrap();
        let gateway = test_gateway(dir.path()).with_idle_timeout(Duration::from_millis(10));
        call(
            &gateway,
            "attention/route",
            route_params("short-lived", "search github issues"),
        );
        assert_eq!(gateway.session_count(), 1);
        std::thread::sleep(Duration::from_millis(25));
        call(&gateway, "initialize", json!({}));
        assert_eq!(gateway.session_count(), 0);
    }

    #[test]
    fn missing_required_params_are_32602() {
        let dir = tempfile::tempdir().unwrap();
        let gateway = test_gateway(dir.path());
        for (method, params) in [
            ("attention/route", json!({"query": "x"})),
            ("attention/route", json!({"session_id": "s"})),
            ("tools/list", json!({})),
            ("tools/call", json!({"session_id": "s"})),
        ] {
            let response = call(&gateway, method, params);
            assert_eq!(response["error"]["code"], -32602, "method {method}");
        }
    }

    #[test]
    fn notifications_get_no_response() {
        let dir = tempfile::tempdir().unwrap();
        let gateway = test_gateway(dir.path());
        let request = json!({"jsonrpc": "2.0", "method": "initialize", "params": {}});
        assert!(gateway.handle_line(&request.to_string()).is_none());
    }

    #[test]
    fn tcp_loopback_round_trip() {
        use std::io::{BufRead, BufReader, Write};

        let dir = tempfile::tempdir().unwrap();
        let gateway = Arc::new(test_gateway(dir.path()));
        let addr = spawn_tcp(Arc::clone(&gateway), "127.0.0.1:0").unwrap();

        let stream = TcpStream::connect(addr).unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut writer = stream;
        let request = json!({"jsonrpc": "2.0", "id": 9, "method": "initialize", "params": {}});
        writer.write_all(format!("{request}\n").as_bytes()).unwrap();
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        let response: Value = serde_json::from_str(line.trim()).unwrap();
        assert_eq!(response["id"], 9);
        assert_eq!(response["result"]["tools"], 120);
    }

    #[test]
    fn remote_fetcher_loopback_matches_registry() {
        use crate::loader::remote_fetcher;

        let dir = tempfile::tempdir().unwrap();
        let gateway = Arc::new(test_gateway(dir.path()));
        let addr = spawn_tcp(Arc::clone(&gateway), "127.0.0.1:0").unwrap();

        // Route first so the session exposes a full definition.
        let routed = call(
            &gateway,
            "attention/route",
            route_params("fetcher", "search github issues by label"),
        );
        let tool_id = routed["result"]["active"][0]["tool_id"].as_str().unwrap();

        let fetch = remote_fetcher(&addr.to_string(), "fetcher");
        let remote_doc = fetch(tool_id).unwrap();
        let registry_doc: Value = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join(format!("{tool_id}.json"))).unwrap(),
        )
        .unwrap();
        assert_eq!(remote_doc, registry_doc);

        // A non-active tool is missing from the session's listing.
        let inactive = gateway
            .attention
            .catalog()
            .tools
            .iter()
            .map(|t| t.id.clone())
            .find(|id| id != tool_id)
            .unwrap();
        assert!(matches!(
            fetch(&inactive).unwrap_err(),
            crate::loader::LoadError::MissingSchema(_)
        ));
    }
}
