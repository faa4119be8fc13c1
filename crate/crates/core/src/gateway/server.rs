//! Live gateway: datagram and cockpit-stream ingest feeding a wall-clock paced
//! session, with state broadcast to cockpit subscribers.
//!
//! Threads: one datagram reader, one cockpit acceptor, a reader and a writer
//! per cockpit connection, and the caller's thread running the session loop.
//! Every thread polls a shared stop flag.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, UdpSocket};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender, SyncSender, TrySendError};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use thiserror::Error;

use super::wire::{decode_frame, encode_frame, StateMsg, WireError};
use crate::config::Config;
use crate::interaction::OperatorFrame;
use crate::session::{RecordSink, Session, SessionError, SessionSummary, StopReason};

const POLL: Duration = Duration::from_millis(20);
const MAX_DATAGRAM: usize = 64 * 1024;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: io::Error },
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Ingest counters, shared by all ingest threads.
#[derive(Debug, Default)]
pub struct IngestStats {
    pub decoded: AtomicU64,
    pub malformed: AtomicU64,
    pub version_mismatch: AtomicU64,
}

impl IngestStats {
    fn count(&self, r: &Result<OperatorFrame, WireError>) {
        let c = match r {
            Ok(_) => &self.decoded,
            Err(WireError::MalformedFrame(_)) => &self.malformed,
            Err(WireError::VersionMismatch { .. }) => &self.version_mismatch,
        };
        c.fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> [u64; 3] {
        [
            self.decoded.load(Ordering::Relaxed),
            self.malformed.load(Ordering::Relaxed),
            self.version_mismatch.load(Ordering::Relaxed),
        ]
    }
}

type Subscribers = Arc<Mutex<Vec<SyncSender<Arc<str>>>>>;

/// Cloneable control handle for a running gateway.
#[derive(Clone)]
pub struct GatewayHandle {
    stop: Arc<AtomicBool>,
    stats: Arc<IngestStats>,
    subscribers: Subscribers,
}

impl GatewayHandle {
    pub fn stop(&self) {
        self.stop.store(true, Ordering::SeqCst);
    }

    pub fn stop_flag(&self) -> Arc<AtomicBool> {
        self.stop.clone()
    }

    pub fn stats(&self) -> &IngestStats {
        &self.stats
    }

    pub fn subscriber_count(&self) -> usize {
        self.subscribers.lock().expect("subscriber list poisoned").len()
    }
}

pub struct Gateway {
    cfg: Config,
    udp: UdpSocket,
    cockpit: Option<TcpListener>,
    handle: GatewayHandle,
}

impl Gateway {
    /// Binds the datagram endpoint and, unless `headless`, the cockpit
    /// endpoint. Port 0 picks a free port; see [`Gateway::udp_addr`].
    pub fn bind(cfg: Config, headless: bool) -> Result<Self, GatewayError> {
        let bind_err = |addr: &str| {
            let addr = addr.to_owned();
            move |source| GatewayError::Bind { addr, source }
        };
        let udp = UdpSocket::bind(&cfg.gateway.listen).map_err(bind_err(&cfg.gateway.listen))?;
        udp.set_read_timeout(Some(POLL))?;
        let cockpit = if headless {
            None
        } else {
            let l = TcpListener::bind(&cfg.gateway.cockpit_listen).map_err(bind_err(&cfg.gateway.cockpit_listen))?;
            l.set_nonblocking(true)?;
            Some(l)
        };
        Ok(Self {
            cfg,
            udp,
            cockpit,
            handle: GatewayHandle {
                stop: Arc::new(AtomicBool::new(false)),
                stats: Arc::new(IngestStats::default()),
                subscribers: Arc::new(Mutex::new(Vec::new())),
            },
        })
    }

    pub fn udp_addr(&self) -> io::Result<SocketAddr> {
        self.udp.local_addr()
    }

    pub fn cockpit_addr(&self) -> Option<SocketAddr> {
        self.cockpit.as_ref().and_then(|l| l.local_addr().ok())
    }

    pub fn handle(&self) -> GatewayHandle {
        self.handle.clone()
    }

    /// Starts the ingest threads; decoded frames from either endpoint go to
    /// `tx` in arrival order.
    pub fn spawn_ingest(&self, tx: Sender<OperatorFrame>) -> io::Result<Vec<JoinHandle<()>>> {
        let mut threads = Vec::new();
        let udp = self.udp.try_clone()?;
        let (h, utx) = (self.handle.clone(), tx.clone());
        threads.push(thread::spawn(move || udp_loop(udp, utx, h)));
        if let Some(listener) = &self.cockpit {
            let listener = listener.try_clone()?;
            let h = self.handle.clone();
            let buffer = self.cfg.gateway.subscriber_buffer;
            threads.push(thread::spawn(move || accept_loop(listener, tx, h, buffer)));
        }
        Ok(threads)
    }

    /// Runs the paced session loop until stopped, until `duration` of wall
    /// time has passed, or until the configured session duration is reached.
    /// Each produced record goes to `sink` and is broadcast to subscribers.
    pub fn run<S: RecordSink + ?Sized>(
        self,
        duration: Option<Duration>,
        sink: &mut S,
    ) -> Result<SessionSummary, GatewayError> {
        let (tx, rx) = mpsc::channel();
        let threads = self.spawn_ingest(tx)?;
        let result = self.session_loop(rx, duration, sink);
        self.handle.stop();
        for t in threads {
            let _ = t.join();
        }
        self.handle.subscribers.lock().expect("subscriber list poisoned").clear();
        result
    }

    fn session_loop<S: RecordSink + ?Sized>(
        &self,
        rx: Receiver<OperatorFrame>,
        duration: Option<Duration>,
        sink: &mut S,
    ) -> Result<SessionSummary, GatewayError> {
        let mut session = Session::new(&self.cfg)?;
        let dt = Duration::from_secs_f64(self.cfg.session.dt());
        let limit = self.cfg.session.max_duration;
        let deadline = duration.map(|d| Instant::now() + d);
        let mut epoch: Option<Instant> = None;
        let stop = loop {
            if self.handle.stop.load(Ordering::SeqCst) {
                break StopReason::Stopped;
            }
            if deadline.is_some_and(|d| Instant::now() >= d) {
                break StopReason::DurationReached;
            }
            while let Ok(f) = rx.try_recv() {
                session.offer(f);
            }
            if !session.is_started() {
                thread::sleep(POLL.min(dt));
                continue;
            }
            let epoch = *epoch.get_or_insert_with(Instant::now);
            if limit.is_some_and(|l| session.tick_index() as f64 * self.cfg.session.dt() >= l) {
                break StopReason::DurationReached;
            }
            if let Some(rec) = session.tick()? {
                sink.record(&rec).map_err(SessionError::from)?;
                if rec.tick % 100 == 0 {
                    sink.flush().map_err(SessionError::from)?;
                }
                if let Some(snap) = session.snapshot() {
                    self.broadcast(StateMsg::from_snapshot(snap, &self.cfg).to_line().into());
                }
            }
            let next = epoch + dt * session.tick_index() as u32;
            if let Some(wait) = next.checked_duration_since(Instant::now()) {
                thread::sleep(wait);
            }
        };
        sink.flush().map_err(SessionError::from)?;
        Ok(session.summary(stop))
    }

    fn broadcast(&self, line: Arc<str>) {
        let mut subs = self.handle.subscribers.lock().expect("subscriber list poisoned");
        subs.retain(|s| match s.try_send(line.clone()) {
            Ok(()) => true,
            Err(TrySendError::Full(_)) => {
                log::warn!("dropping slow cockpit subscriber");
                false
            }
            Err(TrySendError::Disconnected(_)) => false,
        });
    }

    /// Writes every decoded frame to `out` as one JSON line, without running
    /// a session. Returns the number of frames written.
    pub fn record<W: Write>(self, duration: Option<Duration>, out: &mut W) -> Result<u64, GatewayError> {
        let (tx, rx) = mpsc::channel();
        let threads = self.spawn_ingest(tx)?;
        let deadline = duration.map(|d| Instant::now() + d);
        let mut written = 0;
        let result = loop {
            let stopping = self.handle.stop.load(Ordering::SeqCst) || deadline.is_some_and(|d| Instant::now() >= d);
            // once stopping, write out whatever is already queued
            match rx.recv_timeout(if stopping { Duration::ZERO } else { POLL }) {
                Ok(f) => {
                    let mut line = encode_frame(&f);
                    line.push(b'\n');
                    if let Err(e) = out.write_all(&line).and_then(|_| out.flush()) {
                        break Err(e.into());
                    }
                    written += 1;
                }
                Err(mpsc::RecvTimeoutError::Timeout) if !stopping => {}
                Err(_) => break Ok(written),
            }
        };
        self.handle.stop();
        for t in threads {
            let _ = t.join();
        }
        result
    }
}

fn udp_loop(sock: UdpSocket, tx: Sender<OperatorFrame>, h: GatewayHandle) {
    let mut buf = vec![0u8; MAX_DATAGRAM];
    while !h.stop.load(Ordering::SeqCst) {
        let n = match sock.recv_from(&mut buf) {
            Ok((n, _)) => n,
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => continue,
            Err(e) => {
                log::error!("datagram receive failed: {e}");
                return;
            }
        };
        let r = decode_frame(&buf[..n]);
        h.stats.count(&r);
        match r {
            Ok(f) => {
                if tx.send(f).is_err() {
                    return;
                }
            }
            Err(e) => log::debug!("dropped datagram: {e}"),
        }
    }
}

fn accept_loop(listener: TcpListener, tx: Sender<OperatorFrame>, h: GatewayHandle, buffer: usize) {
    while !h.stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                log::info!("cockpit connected from {peer}");
                if let Err(e) = attach(stream, tx.clone(), &h, buffer) {
                    log::warn!("cockpit {peer} setup failed: {e}");
                }
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(POLL),
            Err(e) => {
                log::error!("cockpit accept failed: {e}");
                return;
            }
        }
    }
}

fn attach(stream: TcpStream, tx: Sender<OperatorFrame>, h: &GatewayHandle, buffer: usize) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_read_timeout(Some(POLL))?;
    stream.set_nodelay(true)?;
    let writer = stream.try_clone()?;
    let (stx, srx) = mpsc::sync_channel(buffer.max(1));
    h.subscribers.lock().expect("subscriber list poisoned").push(stx);
    let reader_h = h.clone();
    thread::spawn(move || read_frames(stream, tx, reader_h));
    thread::spawn(move || write_states(writer, srx));
    Ok(())
}

fn read_frames(stream: TcpStream, tx: Sender<OperatorFrame>, h: GatewayHandle) {
    let mut reader = BufReader::new(stream);
    let mut line = Vec::new();
    while !h.stop.load(Ordering::SeqCst) {
        match reader.read_until(b'\n', &mut line) {
            Ok(0) => return,
            Ok(_) if line.last() != Some(&b'\n') => return,
            Ok(_) => {}
            // partial data stays in `line`; keep reading
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => continue,
            Err(_) => return,
        }
        if !line.trim_ascii().is_empty() {
            let r = decode_frame(line.trim_ascii());
            h.stats.count(&r);
            if let Ok(f) = r {
                if tx.send(f).is_err() {
                    return;
                }
            }
        }
        line.clear();
    }
}

fn write_states(mut stream: TcpStream, rx: Receiver<Arc<str>>) {
    for line in rx {
        if stream.write_all(line.as_bytes()).is_err() {
            break;
        }
    }
    let _ = stream.shutdown(std::net::Shutdown::Both);
}
