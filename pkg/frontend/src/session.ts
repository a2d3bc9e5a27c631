/**
 * Authenticated browser session with the five-node cluster.
 *
 * Field parameters are fetched from every node and accepted only when a
 * majority agree; then a mutual challenge-response handshake (the node
 * signs our nonce, we sign its nonce, both bound to fresh X25519 keys) sets
 * up one MAC key per node. Every subsequent envelope is sequence-numbered
 * and MAC'd. Plaintext secrets never enter this module: callers pass in
 * shares and ciphertexts only.
 */

import { concatBytes, fromHex, utf8 } from './encoding.js';
import { hkdf, importBoxKey, importSignKey, randomHex, sign, verifyNodeSig } from './crypto.js';
import { Envelope, canonical, macEnvelope, verifyEnvelope } from './wire.js';

export const NODES = [1, 2, 3, 4, 5] as const;
export const MAJORITY = 3;

export interface Credentials {
	user: string;
	sign_pk: string;
	enc_pk: string;
	sign_priv_pkcs8: string;
	enc_priv_pkcs8: string;
	node_sign_pks: Record<string, string>;
	http_endpoints: Record<string, string>;
	p: string;
}

export class ProtocolError extends Error {
	constructor(public code: string, detail: string) {
		super(`${code}: ${detail}`);
	}
}

interface NodeSession {
	id: string;
	key: Uint8Array;
}

export type Fetcher = (url: string, init: RequestInit) => Promise<Response>;

export class BrowserSession {
	identity: string;
	p!: bigint;
	private sessions = new Map<number, NodeSession>();
	private seqs = new Map<string, number>();

	private constructor(
		public creds: Credentials,
		public signKey: CryptoKey,
		public boxKey: CryptoKey,
		private fetcher: Fetcher,
	) {
		this.identity = `u:${creds.user}`;
	}

	static async open(creds: Credentials, fetcher: Fetcher = (u, i) => fetch(u, i)): Promise<BrowserSession> {
		const session = new BrowserSession(creds, await importSignKey(creds.sign_priv_pkcs8), await importBoxKey(creds.enc_priv_pkcs8), fetcher);
		await session.crossCheckParams();
		await Promise.all(NODES.map((n) => session.authenticate(n)));
		return session;
	}

	// -- transport ------------------------------------------------------------

	private url(node: number): string {
		return `http://${this.creds.http_endpoints[String(node)]}`;
	}

	private nextSeq(scope: string): number {
		const n = this.seqs.get(scope) ?? 0;
		this.seqs.set(scope, n + 1);
		return n;
	}

	private async post(node: number, env: Envelope): Promise<Envelope[]> {
		const resp = await this.fetcher(`${this.url(node)}/v1/envelope`, {
			method: 'POST',
			headers: { 'content-type': 'application/json' },
			body: JSON.stringify(env),
		});
		if (!resp.ok) throw new ProtocolError('Transport', `node ${node} returned ${resp.status}`);
		return (await resp.json()) as Envelope[];
	}

	private unwrap(replies: Envelope[], seq: number, node: number): Envelope {
		const match = replies.find((e) => (e.body as { re?: number }).re === seq);
		if (!match) throw new ProtocolError('NoReply', `node ${node} sent no matching reply`);
		return match;
	}

	// -- parameter cross-check ---------------------------------------------------

	private async crossCheckParams(): Promise<void> {
		const docs = await Promise.all(
			NODES.map(async (n) => {
				const resp = await this.fetcher(`${this.url(n)}/v1/params`, { method: 'GET' });
				return (await resp.json()) as { p: string };
			}),
		);
		const counts = new Map<string, number>();
		for (const d of docs) counts.set(d.p, (counts.get(d.p) ?? 0) + 1);
		const [best, votes] = [...counts.entries()].sort((a, b) => b[1] - a[1])[0];
		if (votes < MAJORITY) throw new ProtocolError('ParamsDisagree', 'no majority field modulus');
		if (best !== this.creds.p) throw new ProtocolError('ParamsDisagree', 'modulus differs from credentials');
		this.p = BigInt(best);
	}

	// -- mutual authentication ------------------------------------------------------

	private async authenticate(node: number): Promise<void> {
		const nonce = randomHex(16);
		const eph = (await crypto.subtle.generateKey({ name: 'X25519' }, true, ['deriveBits'])) as CryptoKeyPair;
		const ephPub = new Uint8Array(await crypto.subtle.exportKey('raw', eph.publicKey));
		const ephHex = Array.from(ephPub, (b) => b.toString(16).padStart(2, '0')).join('');
		const helloSeq = this.nextSeq('auth');
		const hello: Envelope = {
			v: 1, session: '', seq: helloSeq, from: this.identity, to: `n:${node}`,
			kind: 'AUTH_HELLO', body: { id: this.identity, nonce, eph: ephHex }, mac: '',
		};
		const challenge = this.unwrap(await this.post(node, hello), helloSeq, node);
		const cbody = challenge.body as { ok?: boolean; error?: string; detail?: string; nonce: string; eph: string; sig: string };
		if (!cbody.ok) throw new ProtocolError(cbody.error ?? 'AuthFailed', cbody.detail ?? '');
		const transcript = utf8(canonical({ cn: nonce, nn: cbody.nonce, ce: ephHex, ne: cbody.eph, node }));
		if (!(await verifyNodeSig(this.creds.node_sign_pks[String(node)], cbody.sig, transcript))) {
			throw new ProtocolError('BadChallengeResponse', `node ${node} failed to prove its identity`);
		}
		const responseTranscript = utf8(canonical({ nn: cbody.nonce, cn: nonce, ce: ephHex, ne: cbody.eph, id: this.identity }));
		const respSeq = this.nextSeq('auth');
		const response: Envelope = {
			v: 1, session: '', seq: respSeq, from: this.identity, to: `n:${node}`,
			kind: 'AUTH_RESPONSE',
			body: { id: this.identity, nonce: cbody.nonce, sig: await sign(this.signKey, responseTranscript) }, mac: '',
		};
		const ok = this.unwrap(await this.post(node, response), respSeq, node);
		const obody = ok.body as { ok?: boolean; error?: string; detail?: string; session: string };
		if (!obody.ok) throw new ProtocolError(obody.error ?? 'AuthFailed', obody.detail ?? '');
		const peer = await crypto.subtle.importKey('raw', fromHex(cbody.eph) as BufferSource, { name: 'X25519' }, false, []);
		const shared = new Uint8Array(await crypto.subtle.deriveBits({ name: 'X25519', public: peer }, eph.privateKey, 256));
		const key = await hkdf(shared, concatBytes(fromHex(nonce), fromHex(cbody.nonce)), utf8('qv-session-v1'));
		await verifyEnvelope(ok, key); // key confirmation
		this.sessions.set(node, { id: obody.session, key });
	}

	// -- authenticated requests -----------------------------------------------------------

	async request(node: number, kind: string, body: Record<string, unknown>): Promise<Record<string, unknown>> {
		const session = this.sessions.get(node);
		if (!session) throw new ProtocolError('NotConnected', `no session with node ${node}`);
		const seq = this.nextSeq(session.id);
		const env = await macEnvelope(
			{ v: 1, session: session.id, seq, from: this.identity, to: `n:${node}`, kind, body, mac: '' },
			session.key,
		);
		const reply = this.unwrap(await this.post(node, env), seq, node);
		await verifyEnvelope(reply, session.key);
		const rbody = reply.body as { ok: boolean; data?: Record<string, unknown>; error?: string; detail?: string };
		if (!rbody.ok) throw new ProtocolError(rbody.error ?? 'Error', rbody.detail ?? '');
		return rbody.data ?? {};
	}

	/** Fan out concurrently; multi-node sessions need all requests in flight. */
	async requestAll(kind: string, bodyFor: (node: number) => Record<string, unknown>): Promise<Map<number, Record<string, unknown>>> {
		const entries = await Promise.all(
			NODES.map(async (n) => [n, await this.request(n, kind, bodyFor(n))] as const),
		);
		return new Map(entries);
	}

	/** Like requestAll but collects failures instead of rejecting. */
	async requestEach(kind: string, bodyFor: (node: number) => Record<string, unknown>): Promise<Map<number, Record<string, unknown> | ProtocolError>> {
		const entries = await Promise.all(
			NODES.map(async (n): Promise<[number, Record<string, unknown> | ProtocolError]> => {
				try {
					return [n, await this.request(n, kind, bodyFor(n))];
				} catch (err) {
					return [n, err instanceof ProtocolError ? err : new ProtocolError('Error', String(err))];
				}
			}),
		);
		return new Map(entries);
	}
}
