use std::io::Write;

use crate::proto::{SessionTrace, TraceEvent, TraceHeader};

/// Append-only destination for session transitions.
pub trait TraceSink {
    fn header(&mut self, header: &TraceHeader) -> std::io::Result<()>;
    fn event(&mut self, event: &TraceEvent) -> std::io::Result<()>;
}

impl TraceSink for SessionTrace {
    fn header(&mut self, header: &TraceHeader) -> std::io::Result<()> {
        self.header = header.clone();
        Ok(())
    }

    fn event(&mut self, event: &TraceEvent) -> std::io::Result<()> {
        self.events.push(event.clone());
        Ok(())
    }
}

/// Writes one JSON object per line and flushes after each record.
pub struct JsonlTraceWriter<W: Write> {
    out: W,
}

impl<W: Write> JsonlTraceWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }

    fn line<T: serde::Serialize>(&mut self, value: &T) -> std::io::Result<()> {
        serde_json::to_writer(&mut self.out, value)?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }
}

impl<W: Write> TraceSink for JsonlTraceWriter<W> {
    fn header(&mut self, header: &TraceHeader) -> std::io::Result<()> {
        self.line(header)
    }

    fn event(&mut self, event: &TraceEvent) -> std::io::Result<()> {
        self.line(event)
    }
}

/// Fans every record out to two sinks.
impl<A: TraceSink, B: TraceSink> TraceSink for (A, B) {
    fn header(&mut self, header: &TraceHeader) -> std::io::Result<()> {
        self.0.header(header)?;
        self.1.header(header)
    }

    fn event(&mut self, event: &TraceEvent) -> std::io::Result<()> {
        self.0.event(event)?;
        self.1.event(event)
    }
}
