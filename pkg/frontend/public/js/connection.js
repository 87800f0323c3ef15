/**
 * WebSocket connection with reconnect backoff and inbound ordering.
 *
 * Outbound messages get strictly increasing sequence numbers; inbound
 * messages that arrive with a stale sequence number are discarded and
 * counted, never delivered to the session layer.
 */
import { decodeMessage, encodeMessage } from "./protocol.js";
export class RobotConnection {
    url;
    state = "closed";
    staleDropped = 0;
    reconnectAttempts = 0;
    outSeq = 0;
    lastInSeq = -1;
    socket = null;
    closedByUser = false;
    factory;
    backoffBase;
    backoffMax;
    random;
    setTimer;
    messageListeners = [];
    stateListeners = [];
    constructor(url, options = {}) {
        this.url = url;
        this.factory =
            options.socketFactory ??
                ((u) => new WebSocket(u));
        this.backoffBase = options.backoffBaseMs ?? 500;
        this.backoffMax = options.backoffMaxMs ?? 15000;
        this.random = options.random ?? Math.random;
        this.setTimer = options.setTimer ?? ((fn, ms) => setTimeout(fn, ms));
    }
    onMessage(listener) {
        this.messageListeners.push(listener);
    }
    onState(listener) {
        this.stateListeners.push(listener);
    }
    setState(s) {
        this.state = s;
        for (const l of this.stateListeners)
            l(s);
    }
    connect() {
        this.closedByUser = false;
        this.open("connecting");
    }
    open(entering) {
        this.setState(entering);
        let socket;
        try {
            socket = this.factory(this.url);
        }
        catch {
            this.scheduleReconnect();
            return;
        }
        this.socket = socket;
        socket.onopen = () => {
            this.reconnectAttempts = 0;
            this.lastInSeq = -1; // new server connection, new sequence space
            this.setState("open");
        };
        socket.onmessage = (ev) => {
            let msg;
            try {
                msg = decodeMessage(String(ev.data));
            }
            catch {
                return; // undecodable frames are dropped silently
            }
            if (msg.seq <= this.lastInSeq) {
                this.staleDropped += 1;
                return;
            }
            this.lastInSeq = msg.seq;
            for (const l of this.messageListeners)
                l(msg);
        };
        socket.onclose = () => {
            this.socket = null;
            if (!this.closedByUser)
                this.scheduleReconnect();
            else
                this.setState("closed");
        };
        socket.onerror = () => {
            /* onclose follows */
        };
    }
    scheduleReconnect() {
        this.setState("reconnecting");
        const delay = this.nextBackoffMs();
        this.reconnectAttempts += 1;
        this.setTimer(() => {
            if (!this.closedByUser)
                this.open("reconnecting");
        }, delay);
    }
    nextBackoffMs() {
        const raw = Math.min(this.backoffBase * Math.pow(2, this.reconnectAttempts), this.backoffMax);
        // +-25% jitter so a crowd of clients does not stampede the server
        return Math.max(0, Math.round(raw * (1 + 0.25 * (this.random() * 2 - 1))));
    }
    /** Send one message; returns the message actually written. */
    send(type, payload = {}) {
        if (!this.socket || this.state !== "open") {
            throw new Error(`cannot send while connection is ${this.state}`);
        }
        this.outSeq += 1;
        const msg = {
            type,
            payload,
            seq: this.outSeq,
            ts: Date.now() / 1000,
        };
        this.socket.send(encodeMessage(msg));
        return msg;
    }
    close() {
        this.closedByUser = true;
        if (this.socket)
            this.socket.close();
        else
            this.setState("closed");
    }
}
//# sourceMappingURL=connection.js.map