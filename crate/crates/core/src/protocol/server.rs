//! A small HTTP server hosting backends, used for loopback runs and as the
//! reference mock in protocol tests.

use std::collections::HashMap;
use std::net::{SocketAddr, ToSocketAddrs};
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use socket2::{Domain, Protocol, Socket, Type};

use super::client::{
    check_perception_response, CONTROLLER_SUMMARY_PATH, CONTROLLER_TURN_PATH, IDEMPOTENCY_HEADER, PERCEPTION_QUERY_PATH,
};
use super::wire::{ControllerTextResponse, ControllerTurnRequest, ErrorBody, PerceptionQueryRequest, View};
use crate::engine::{BackendError, ControllerBackend, PerceptionBackend};

/// One decoded HTTP request.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IncomingRequest {
    pub method: String,
    pub path: String,
    pub idempotency_key: Option<String>,
    pub body: String,
}

/// Status code and JSON body.
pub type Reply = (u16, String);

pub trait Handler: Send + Sync {
    fn handle(&self, request: &IncomingRequest) -> Reply;
}

impl<F: Fn(&IncomingRequest) -> Reply + Send + Sync> Handler for F {
    fn handle(&self, request: &IncomingRequest) -> Reply {
        self(request)
    }
}

pub fn error_reply(status: u16, code: &str, error: impl Into<String>) -> Reply {
    let body = ErrorBody {
        error: error.into(),
        code: code.to_string(),
    };
    (status, serde_json::to_string(&body).expect("error body serializes"))
}

/// Serves `handler` on a few worker threads until dropped or shut down.
pub struct HttpServer {
    server: Arc<tiny_http::Server>,
    workers: Vec<JoinHandle<()>>,
    addr: SocketAddr,
}

const WORKERS: usize = 4;

impl HttpServer {
    /// Binds `addr`; port 0 picks a free port.
    pub fn start(addr: &str, handler: Arc<dyn Handler>) -> std::io::Result<Self> {
        let server = tiny_http::Server::from_listener(nodelay_listener(addr)?, None).map_err(std::io::Error::other)?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::other("server is not bound to an IP address"))?;
        let server = Arc::new(server);
        let workers = (0..WORKERS)
            .map(|_| {
                let server = Arc::clone(&server);
                let handler = Arc::clone(&handler);
                std::thread::spawn(move || {
                    while let Ok(mut req) = server.recv() {
                        let mut body = String::new();
                        let (status, text) = if req.as_reader().read_to_string(&mut body).is_err() {
                            error_reply(400, "bad_body", "request body is not UTF-8")
                        } else {
                            let incoming = IncomingRequest {
                                method: req.method().as_str().to_string(),
                                path: req.url().to_string(),
                                idempotency_key: req
                                    .headers()
                                    .iter()
                                    .find(|h| h.field.equiv(IDEMPOTENCY_HEADER))
                                    .map(|h| h.value.as_str().to_string()),
                                body,
                            };
                            handler.handle(&incoming)
                        };
                        let header = tiny_http::Header::from_bytes("Content-Type", "application/json")
                            .expect("static header is valid");
                        let resp = tiny_http::Response::from_string(text)
                            .with_status_code(status)
                            .with_header(header);
                        let _ = req.respond(resp);
                    }
                })
            })
            .collect();
        Ok(Self { server, workers, addr })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        for _ in &self.workers {
            self.server.unblock();
        }
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

/// tiny_http writes headers and large bodies separately and never sets
/// TCP_NODELAY, so every response over ~1 KiB would wait out the peer's
/// delayed ACK (~40 ms). Accepted sockets inherit the option from the
/// listener on Linux.
fn nodelay_listener(addr: &str) -> std::io::Result<std::net::TcpListener> {
    let addr: SocketAddr = addr
        .to_socket_addrs()?
        .next()
        .ok_or_else(|| std::io::Error::other(format!("{addr} resolves to nothing")))?;
    let socket = Socket::new(Domain::for_address(addr), Type::STREAM, Some(Protocol::TCP))?;
    socket.set_reuse_address(true)?;
    socket.set_tcp_nodelay(true)?;
    socket.bind(&addr.into())?;
    socket.listen(128)?;
    Ok(socket.into())
}

impl Drop for HttpServer {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Injected failures for the reference service.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FaultPlan {
    /// Answer this many requests with 500 before touching the backend.
    pub fail_before: u32,
    /// Run this many requests, then drop the result and answer 500, as if
    /// the response were lost in transit.
    pub lose_after: u32,
}

/// Reference implementation of the three endpoints over in-process
/// backends, with an idempotency cache keyed by `Idempotency-Key`.
pub struct ReferenceService {
    controller: Arc<dyn ControllerBackend>,
    perception: Arc<dyn PerceptionBackend>,
    cache: Mutex<HashMap<String, Reply>>,
    faults: Mutex<FaultPlan>,
    executions: AtomicU32,
}

impl ReferenceService {
    pub fn new(controller: Arc<dyn ControllerBackend>, perception: Arc<dyn PerceptionBackend>) -> Self {
        Self {
            controller,
            perception,
            cache: Mutex::new(HashMap::new()),
            faults: Mutex::new(FaultPlan::default()),
            executions: AtomicU32::new(0),
        }
    }

    pub fn set_faults(&self, plan: FaultPlan) {
        *self.faults.lock().expect("fault lock") = plan;
    }

    /// Backend invocations so far; cached replays do not count.
    pub fn executions(&self) -> u32 {
        self.executions.load(Ordering::SeqCst)
    }

    fn execute(&self, request: &IncomingRequest) -> Reply {
        self.executions.fetch_add(1, Ordering::SeqCst);
        let backend_reply = |r: Result<String, BackendError>| match r {
            Ok(text) => (
                200,
                serde_json::to_string(&ControllerTextResponse { text }).expect("response serializes"),
            ),
            Err(e) => error_reply(502, "backend_failure", e.to_string()),
        };
        match request.path.as_str() {
            CONTROLLER_TURN_PATH | CONTROLLER_SUMMARY_PATH => {
                let req: ControllerTurnRequest = match serde_json::from_str(&request.body) {
                    Ok(r) => r,
                    Err(e) => return error_reply(400, "schema_violation", e.to_string()),
                };
                if req.history.is_empty() {
                    return error_reply(400, "schema_violation", "history must not be empty");
                }
                if request.path == CONTROLLER_TURN_PATH {
                    backend_reply(self.controller.next_turn(&req.history))
                } else {
                    backend_reply(self.controller.summary(&req.history))
                }
            }
            PERCEPTION_QUERY_PATH => {
                let req: PerceptionQueryRequest = match serde_json::from_str(&request.body) {
                    Ok(r) => r,
                    Err(e) => return error_reply(400, "schema_violation", e.to_string()),
                };
                if let View::Image(img) = &req.view {
                    if let Err(e) = BASE64.decode(&img.data) {
                        return error_reply(400, "schema_violation", format!("image data is not base64: {e}"));
                    }
                }
                match self.perception.query(&req) {
                    Ok(resp) => match check_perception_response(&resp) {
                        Ok(()) => (200, serde_json::to_string(&resp).expect("response serializes")),
                        Err(e) => error_reply(502, "upstream_schema", e.to_string()),
                    },
                    Err(BackendError::Rejected(m)) => error_reply(422, "rejected", m),
                    Err(e) => error_reply(502, "backend_failure", e.to_string()),
                }
            }
            other => error_reply(404, "not_found", format!("no endpoint {other}")),
        }
    }
}

impl Handler for ReferenceService {
    fn handle(&self, request: &IncomingRequest) -> Reply {
        if request.method != "POST" {
            return error_reply(405, "method_not_allowed", "use POST");
        }
        if let Some(cached) = request
            .idempotency_key
            .as_ref()
            .and_then(|k| self.cache.lock().expect("cache lock").get(k).cloned())
        {
            return cached;
        }
        let lose = {
            let mut f = self.faults.lock().expect("fault lock");
            if f.fail_before > 0 {
                f.fail_before -= 1;
                return error_reply(500, "injected", "injected failure");
            }
            if f.lose_after > 0 {
                f.lose_after -= 1;
                true
            } else {
                false
            }
        };
        let reply = self.execute(request);
        if let Some(k) = &request.idempotency_key {
            if reply.0 < 500 {
                self.cache.lock().expect("cache lock").insert(k.clone(), reply.clone());
            }
        }
        if lose {
            return error_reply(500, "injected", "response lost");
        }
        reply
    }
}
