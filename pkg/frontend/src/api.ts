/** Typed client for the annotation service; the only network surface. */

import type {
  ClassDetail,
  ClassListResponse,
  ExportRecord,
  SubmissionBody,
  SubmissionResponse,
} from './types.js';

export class ApiError extends Error {
  constructor(message: string, readonly status: number | null = null) {
    super(message);
  }
}

export class ApiClient {
  constructor(private baseUrl: string = '', private token: string | null = null) {}

  private headers(json: boolean): Record<string, string> {
    const h: Record<string, string> = {};
    if (json) h['Content-Type'] = 'application/json';
    if (this.token) h['Authorization'] = `Bearer ${this.token}`;
    return h;
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let response: Response;
    try {
      response = await fetch(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(`service unreachable: ${String(err)}`);
    }
    if (!response.ok) {
      let detail = response.statusText;
      try {
        detail = ((await response.json()) as { error?: string }).error ?? detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(detail, response.status);
    }
    return response;
  }

  async listClasses(status?: 'pending' | 'done'): Promise<ClassListResponse> {
    const query = status ? `?status=${status}` : '';
    const resp = await this.request(`/classes${query}`, {
      headers: this.headers(false),
    });
    return (await resp.json()) as ClassListResponse;
  }

  async getClass(classId: string): Promise<ClassDetail> {
    const resp = await this.request(
      `/classes/${encodeURIComponent(classId)}/candidates`,
      { headers: this.headers(false) },
    );
    return (await resp.json()) as ClassDetail;
  }

  /** Serialize once so tests can compare the exact bytes put on the wire. */
  serializeSubmission(body: SubmissionBody): string {
    return JSON.stringify(body);
  }

  async submitAnnotation(
    classId: string,
    body: SubmissionBody,
  ): Promise<SubmissionResponse> {
    const resp = await this.request(
      `/classes/${encodeURIComponent(classId)}/annotation`,
      {
        method: 'POST',
        headers: this.headers(true),
        body: this.serializeSubmission(body),
      },
    );
    return (await resp.json()) as SubmissionResponse;
  }

  async exportRecords(partial = true): Promise<ExportRecord[]> {
    const resp = await this.request(`/export?partial=${partial ? 1 : 0}`, {
      headers: this.headers(false),
    });
    const text = await resp.text();
    return text
      .split('\n')
      .filter((line) => line.trim().length > 0)
      .map((line) => JSON.parse(line) as ExportRecord);
  }
}
