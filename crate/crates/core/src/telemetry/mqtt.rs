use std::sync::mpsc::{channel, Receiver};
use std::thread;
use std::time::Duration;

use rumqttc::{Client, Event, MqttOptions, Packet, QoS};

use super::{Message, Subscribe, TelemetryError, Transport, TransportStats};

/// Transport over an external MQTT broker, QoS 1 (at-least-once).
pub struct MqttTransport {
    client: Client,
    stats: TransportStats,
    host: String,
    port: u16,
    client_id: String,
}

/// Accepts `mqtt://host:port`, `tcp://host:port` or `host:port`.
fn parse_broker_url(url: &str) -> Result<(String, u16), TelemetryError> {
    let rest = url.strip_prefix("mqtt://").or_else(|| url.strip_prefix("tcp://")).unwrap_or(url);
    let (host, port) = match rest.rsplit_once(':') {
        Some((h, p)) => (
            h,
            p.trim_end_matches('/')
                .parse::<u16>()
                .map_err(|_| TelemetryError::Transport(format!("bad broker port in {url:?}")))?,
        ),
        None => (rest.trim_end_matches('/'), 1883),
    };
    if host.is_empty() {
        return Err(TelemetryError::Transport(format!("bad broker url {url:?}")));
    }
    Ok((host.to_string(), port))
}

fn options(client_id: &str, host: &str, port: u16) -> MqttOptions {
    let mut opts = MqttOptions::new(client_id, host, port);
    opts.set_keep_alive(Duration::from_secs(30));
    opts.set_max_packet_size(1 << 20, 1 << 20);
    opts
}

impl MqttTransport {
    pub fn connect(url: &str, client_id: &str) -> Result<Self, TelemetryError> {
        let (host, port) = parse_broker_url(url)?;
        let (client, mut connection) = Client::new(options(client_id, &host, port), 256);
        thread::spawn(move || {
            for event in connection.iter() {
                if let Err(e) = event {
                    log::warn!("mqtt publisher connection: {e}");
                    thread::sleep(Duration::from_millis(500));
                }
            }
        });
        Ok(Self { client, stats: TransportStats::default(), host, port, client_id: client_id.to_string() })
    }
}

impl Transport for MqttTransport {
    fn publish(&mut self, topic: &str, payload: &str) -> Result<(), TelemetryError> {
        match self.client.publish(topic, QoS::AtLeastOnce, false, payload.as_bytes().to_vec()) {
            Ok(()) => {
                self.stats.published += 1;
                Ok(())
            }
            Err(e) => {
                self.stats.failed += 1;
                Err(TelemetryError::Transport(e.to_string()))
            }
        }
    }

    fn stats(&self) -> TransportStats {
        self.stats
    }
}

impl Subscribe for MqttTransport {
    /// Opens a second connection dedicated to the subscription.
    fn subscribe(&self, filters: &[&str]) -> Result<Receiver<Message>, TelemetryError> {
        let id = format!("{}-sub", self.client_id);
        let (client, mut connection) = Client::new(options(&id, &self.host, self.port), 256);
        for f in filters {
            client.subscribe(*f, QoS::AtLeastOnce).map_err(|e| TelemetryError::Transport(e.to_string()))?;
        }
        let (tx, rx) = channel();
        thread::spawn(move || {
            let _client = client;
            for event in connection.iter() {
                match event {
                    Ok(Event::Incoming(Packet::Publish(p))) => {
                        let msg = Message {
                            topic: p.topic.clone(),
                            payload: String::from_utf8_lossy(&p.payload).into_owned(),
                        };
                        if tx.send(msg).is_err() {
                            break;
                        }
                    }
                    Ok(_) => {}
                    Err(e) => {
                        log::warn!("mqtt subscriber connection: {e}");
                        thread::sleep(Duration::from_millis(500));
                    }
                }
            }
        });
        Ok(rx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn broker_urls() {
        assert_eq!(parse_broker_url("mqtt://localhost:1884").unwrap(), ("localhost".into(), 1884));
        assert_eq!(parse_broker_url("10.0.0.2").unwrap(), ("10.0.0.2".into(), 1883));
        assert!(parse_broker_url("mqtt://:x").is_err());
    }
}
