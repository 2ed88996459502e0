//! TCP transport: one thread per connection, one request per line.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use super::Service;

fn connection(service: &Service, stream: TcpStream) -> io::Result<()> {
    let mut out = stream.try_clone()?;
    for line in BufReader::new(stream).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = service.handle_line(&line);
        out.write_all(resp.as_bytes())?;
        out.write_all(b"\n")?;
        out.flush()?;
    }
    Ok(())
}

/// Accepts connections until the listener fails.
pub fn serve(service: Arc<Service>, listener: TcpListener) -> io::Result<()> {
    for stream in listener.incoming() {
        let stream = stream?;
        let svc = service.clone();
        thread::spawn(move || {
            // a broken connection only ends that client's thread
            let _ = connection(&svc, stream);
        });
    }
    Ok(())
}

/// Binds `addr` and serves on a background thread. Returns the bound
/// address, useful with port 0.
pub fn spawn(
    service: Arc<Service>,
    addr: impl ToSocketAddrs,
) -> io::Result<(SocketAddr, JoinHandle<io::Result<()>>)> {
    let listener = TcpListener::bind(addr)?;
    let local = listener.local_addr()?;
    Ok((local, thread::spawn(move || serve(service, listener))))
}
