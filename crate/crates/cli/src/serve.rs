//! Live stream endpoint: WebSocket text frames carrying the line protocol in
//! [`crate::protocol`].
//!
//! Connection readers parse messages and queue them in a bounded inbox; one
//! engine task drains the inbox and fans VIEW and RESULT frames out to every
//! client. When the inbox is full the oldest queued POSE is dropped, so the
//! engine always works on fresh poses and never blocks a reader. Control
//! messages are never dropped.

use std::collections::{HashMap, VecDeque};
use std::sync::{Arc, Mutex};

use anyhow::Result;
use futures_util::{SinkExt, StreamExt};
use headzoom::{CalibrationProfile, EngineConfig};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc, Notify};
use tokio_tungstenite::tungstenite::Message;

use crate::protocol::{error_frame, parse_inbound, Inbound, Reply, Session};

/// Queued inbound messages before stale poses are dropped.
pub const INBOX_CAPACITY: usize = 256;
const BROADCAST_CAPACITY: usize = 4096;
const DIRECT_CAPACITY: usize = 64;

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub config: EngineConfig,
    pub profile: Option<CalibrationProfile>,
}

type ConnId = u64;

enum Event {
    Message(Inbound),
    Closed,
}

#[derive(Default)]
struct Inbox {
    queue: Mutex<VecDeque<(ConnId, Event)>>,
    notify: Notify,
}

impl Inbox {
    fn push(&self, conn: ConnId, event: Event) {
        let mut q = self.queue.lock().expect("inbox lock");
        if q.len() >= INBOX_CAPACITY && matches!(event, Event::Message(Inbound::Pose(_))) {
            if let Some(i) = q.iter().position(|(_, e)| matches!(e, Event::Message(Inbound::Pose(_)))) {
                q.remove(i);
            }
        }
        q.push_back((conn, event));
        drop(q);
        self.notify.notify_one();
    }

    async fn pop(&self) -> (ConnId, Event) {
        loop {
            if let Some(item) = self.queue.lock().expect("inbox lock").pop_front() {
                return item;
            }
            self.notify.notified().await;
        }
    }
}

type Directs = Arc<Mutex<HashMap<ConnId, mpsc::Sender<String>>>>;

fn send_direct(directs: &Directs, conn: ConnId, frame: String) {
    if let Some(tx) = directs.lock().expect("directs lock").get(&conn) {
        // a client that stops reading loses error frames rather than stalling the engine
        let _ = tx.try_send(frame);
    }
}

async fn engine_loop(mut session: Session, inbox: Arc<Inbox>, views: broadcast::Sender<String>, directs: Directs) {
    let mut producer: Option<ConnId> = None;
    loop {
        let (conn, event) = inbox.pop().await;
        let msg = match event {
            Event::Closed => {
                if producer == Some(conn) {
                    // the engine keeps its last view until a new producer appears
                    producer = None;
                }
                continue;
            }
            Event::Message(m) => m,
        };
        if let Inbound::Pose(_) = msg {
            match producer {
                None => producer = Some(conn),
                Some(p) if p != conn => {
                    send_direct(&directs, conn, error_frame("another client is already sending poses"));
                    continue;
                }
                Some(_) => {}
            }
        }
        for reply in session.handle(msg) {
            match reply {
                Reply::All(frame) => {
                    let _ = views.send(frame);
                }
                Reply::Sender(frame) => send_direct(&directs, conn, frame),
            }
        }
    }
}

async fn connection(
    stream: TcpStream,
    conn: ConnId,
    inbox: Arc<Inbox>,
    views: broadcast::Sender<String>,
    directs: Directs,
) {
    let Ok(ws) = tokio_tungstenite::accept_async(stream).await else {
        return;
    };
    let (mut sink, mut source) = ws.split();
    let (tx, mut rx) = mpsc::channel::<String>(DIRECT_CAPACITY);
    directs.lock().expect("directs lock").insert(conn, tx.clone());
    let mut fanout = views.subscribe();

    let writer = tokio::spawn(async move {
        loop {
            let frame = tokio::select! {
                f = rx.recv() => match f {
                    Some(f) => f,
                    None => break,
                },
                f = fanout.recv() => match f {
                    Ok(f) => f,
                    Err(broadcast::error::RecvError::Lagged(_)) => continue,
                    Err(broadcast::error::RecvError::Closed) => break,
                },
            };
            if sink.send(Message::text(frame)).await.is_err() {
                break;
            }
        }
    });

    while let Some(Ok(msg)) = source.next().await {
        let text = match msg {
            Message::Text(t) => t,
            Message::Close(_) => break,
            Message::Binary(_) => {
                let _ = tx.try_send(error_frame("binary frames are not supported"));
                continue;
            }
            _ => continue,
        };
        for line in text.as_str().split('\n').map(str::trim).filter(|l| !l.is_empty()) {
            match parse_inbound(line) {
                Ok(m) => inbox.push(conn, Event::Message(m)),
                Err(e) => {
                    let _ = tx.try_send(error_frame(&e.0));
                }
            }
        }
    }

    inbox.push(conn, Event::Closed);
    directs.lock().expect("directs lock").remove(&conn);
    drop(tx);
    writer.abort();
}

/// Serves until the listener fails. Prints the bound address first.
pub async fn run(listener: TcpListener, opts: ServeOptions) -> Result<()> {
    let session = Session::new(opts.config, opts.profile)?;
    println!("listening on ws://{}", listener.local_addr()?);
    let inbox = Arc::new(Inbox::default());
    let (views, _) = broadcast::channel(BROADCAST_CAPACITY);
    let directs: Directs = Arc::default();
    tokio::spawn(engine_loop(session, inbox.clone(), views.clone(), directs.clone()));
    let mut next_id: ConnId = 0;
    loop {
        let (stream, _) = listener.accept().await?;
        next_id += 1;
        tokio::spawn(connection(stream, next_id, inbox.clone(), views.clone(), directs.clone()));
    }
}
